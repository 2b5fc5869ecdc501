//! Rolling one-step-ahead conditional variance and VaR forecasts.

use serde::{Deserialize, Serialize};

use crate::dist::ErrorLaw;
use crate::error::{Error, Result};
use crate::estimate::{fit, FitConfig, FittedModel};
use crate::market::BarSeries;
use crate::model::{self, FilterState, ModelSpec, RegressorSet};

/// One-step-ahead VaR forecasts for a set of models at one quantile level,
/// aligned to the realized out-of-sample returns.
#[derive(Debug, Clone)]
pub struct VaRPanel {
    /// Close times of the forecast targets.
    pub timestamps: Vec<i64>,
    pub realized_returns: Vec<f64>,
    pub tau: f64,
    pub model_ids: Vec<String>,
    /// `var[j][t]`: model j's forecasted tau-quantile for time t.
    pub var: Vec<Vec<f64>>,
    /// `sigma2_hat[j][t]`: model j's predicted conditional variance for time t.
    pub sigma2_hat: Vec<Vec<f64>>,
}

impl VaRPanel {
    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn horizon(&self) -> usize {
        self.realized_returns.len()
    }

    /// Restrict the panel to the given model columns (by position).
    pub fn select(&self, indices: &[usize]) -> Result<VaRPanel> {
        for &j in indices {
            if j >= self.n_models() {
                return Err(Error::InvalidInput(format!(
                    "model index {j} out of range ({} models)",
                    self.n_models()
                )));
            }
        }
        Ok(VaRPanel {
            timestamps: self.timestamps.clone(),
            realized_returns: self.realized_returns.clone(),
            tau: self.tau,
            model_ids: indices.iter().map(|&j| self.model_ids[j].clone()).collect(),
            var: indices.iter().map(|&j| self.var[j].clone()).collect(),
            sigma2_hat: indices
                .iter()
                .map(|&j| self.sigma2_hat[j].clone())
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RollConfig {
    /// Fraction of the return series used as the (rolling) estimation window.
    pub insample_fraction: f64,
    /// Bars between refits; between refits parameters stay frozen while the
    /// filter state tracks realized data.
    pub refit_every: usize,
    /// Quantile levels, each in (0, 0.5).
    pub taus: Vec<f64>,
}

impl Default for RollConfig {
    fn default() -> Self {
        Self {
            insample_fraction: 0.5,
            refit_every: 100,
            taus: vec![0.01, 0.001],
        }
    }
}

impl RollConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.insample_fraction > 0.0 && self.insample_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "insample_fraction must lie in (0,1) (got {})",
                self.insample_fraction
            )));
        }
        if self.refit_every == 0 {
            return Err(Error::InvalidInput("refit_every must be positive".into()));
        }
        if self.taus.is_empty() {
            return Err(Error::InvalidInput("at least one tau required".into()));
        }
        for &tau in &self.taus {
            if !(tau > 0.0 && tau < 0.5) {
                return Err(Error::InvalidInput(format!(
                    "tau must lie in (0, 0.5) (got {tau})"
                )));
            }
        }
        Ok(())
    }
}

/// Advance the fitted model one step: mean forecast mu + phi r_t and the
/// variance recursion applied to the current state with the next (raw,
/// unscaled) covariate row.
pub fn forecast_one_step(
    fitted: &FittedModel,
    state: &FilterState,
    r_t: f64,
    x_next_raw: &[f64],
) -> Result<(f64, f64)> {
    if x_next_raw.len() != fitted.regressor_scales.len() {
        return Err(Error::InvalidInput(format!(
            "covariate row has {} entries; model expects {}",
            x_next_raw.len(),
            fitted.regressor_scales.len()
        )));
    }
    let law = fitted.law()?;
    let mut dx = 0.0;
    for ((x, scale), d) in x_next_raw
        .iter()
        .zip(&fitted.regressor_scales)
        .zip(&fitted.params.delta)
    {
        dx += d * x / scale;
    }
    let abs_moment = law.abs_moment()?;
    let sigma2_next =
        model::variance_step(fitted.spec.dynamics, &fitted.params, abs_moment, state, dx);
    if !sigma2_next.is_finite() || sigma2_next <= 0.0 {
        return Err(Error::NonFinite {
            index: 0,
            message: format!("forecast variance {sigma2_next}"),
        });
    }
    let mu_next = fitted.params.mu + fitted.params.phi * r_t;
    Ok((mu_next, sigma2_next))
}

/// The tau-quantile of the one-step-ahead return distribution.
pub fn var_forecast(mu: f64, sigma2: f64, law: &ErrorLaw, tau: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "variance must be positive (got {sigma2})"
        )));
    }
    Ok(mu + sigma2.sqrt() * law.quantile(tau)?)
}

/// A model that failed somewhere in the rolling run, with the bar index of
/// the failure.
#[derive(Debug, Clone)]
pub struct ExcludedModel {
    pub model_id: String,
    pub at_bar: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct RollingOutput {
    /// One panel per tau, in the order of `config.taus`.
    pub panels: Vec<VaRPanel>,
    pub excluded: Vec<ExcludedModel>,
}

/// Run the rolling out-of-sample forecast for a list of model specifications.
///
/// The estimation window is a fixed-length trailing window equal to the
/// in-sample size. Models are refit every `refit_every` bars; between refits
/// parameters and covariate scales stay frozen while the filter state updates
/// with realized data. A model whose fit or forecast fails is dropped from
/// every panel and reported in `excluded` rather than zero-filled.
pub fn rolling_run(
    specs: &[(ModelSpec, RegressorSet)],
    data: &BarSeries,
    config: &RollConfig,
    fit_config: &FitConfig,
) -> Result<RollingOutput> {
    config.validate()?;
    if specs.is_empty() {
        return Err(Error::InvalidInput("no model specifications".into()));
    }
    let returns = &data.log_returns;
    let n = returns.len();
    let n_in = (n as f64 * config.insample_fraction).floor() as usize;
    if n_in < fit_config.min_obs || n_in < 2 {
        return Err(Error::InvalidInput(format!(
            "in-sample window of {n_in} bars is too short"
        )));
    }
    if n_in >= n {
        return Err(Error::InvalidInput(
            "no out-of-sample observations left".into(),
        ));
    }
    let horizon = n - n_in;
    let timestamps: Vec<i64> = data.return_timestamps()[n_in..].to_vec();
    let realized: Vec<f64> = returns[n_in..].to_vec();

    let mut kept_ids: Vec<String> = Vec::new();
    let mut var_cols: Vec<Vec<Vec<f64>>> = vec![Vec::new(); config.taus.len()];
    let mut sigma2_cols: Vec<Vec<Vec<f64>>> = vec![Vec::new(); config.taus.len()];
    let mut excluded = Vec::new();

    'models: for (spec, regressors) in specs {
        regressors.check_alignment(n)?;
        let mut var_by_tau: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon); config.taus.len()];
        let mut sigma2_col: Vec<f64> = Vec::with_capacity(horizon);

        let mut fitted: Option<FittedModel> = None;
        let mut law = ErrorLaw::Gaussian;
        let mut state = FilterState {
            eps: 0.0,
            sigma2: 1.0,
            z: 0.0,
        };

        for (step, t) in (n_in..n).enumerate() {
            if step % config.refit_every == 0 {
                // refit on the trailing window [t - n_in, t)
                let window = &returns[t - n_in..t];
                let window_regs = slice_regressors(regressors, t - n_in, t);
                match fit(*spec, &window_regs, window, fit_config) {
                    Ok(f) => {
                        let resolved = match f.law() {
                            Ok(l) => l,
                            Err(e) => {
                                excluded.push(ExcludedModel {
                                    model_id: spec.id(),
                                    at_bar: t,
                                    reason: e.to_string(),
                                });
                                continue 'models;
                            }
                        };
                        // rebuild the filter state under the new parameters
                        let scaled = match window_regs.scaled_by(&f.regressor_scales) {
                            Ok(s) => s,
                            Err(e) => {
                                excluded.push(ExcludedModel {
                                    model_id: spec.id(),
                                    at_bar: t,
                                    reason: e.to_string(),
                                });
                                continue 'models;
                            }
                        };
                        match model::filter(spec.dynamics, &resolved, &f.params, window, &scaled) {
                            Ok(out) => {
                                state = out.tail().expect("non-empty window");
                                law = resolved;
                                fitted = Some(f);
                            }
                            Err(e) => {
                                excluded.push(ExcludedModel {
                                    model_id: spec.id(),
                                    at_bar: t,
                                    reason: e.to_string(),
                                });
                                continue 'models;
                            }
                        }
                    }
                    Err(e) => {
                        excluded.push(ExcludedModel {
                            model_id: spec.id(),
                            at_bar: t,
                            reason: e.to_string(),
                        });
                        continue 'models;
                    }
                }
            }
            let f = fitted.as_ref().expect("fitted at first step");
            let x_next = regressor_row(regressors, t);
            let (mu_next, sigma2_next) = match forecast_one_step(f, &state, returns[t - 1], &x_next)
            {
                Ok(v) => v,
                Err(e) => {
                    excluded.push(ExcludedModel {
                        model_id: spec.id(),
                        at_bar: t,
                        reason: e.to_string(),
                    });
                    continue 'models;
                }
            };
            for (k, &tau) in config.taus.iter().enumerate() {
                var_by_tau[k].push(var_forecast(mu_next, sigma2_next, &law, tau)?);
            }
            sigma2_col.push(sigma2_next);

            // fold the realized return into the state
            let eps_t = returns[t] - f.params.mu - f.params.phi * returns[t - 1];
            state = FilterState {
                eps: eps_t,
                sigma2: sigma2_next,
                z: eps_t / sigma2_next.sqrt(),
            };
        }

        kept_ids.push(spec.id());
        for (k, col) in var_by_tau.into_iter().enumerate() {
            var_cols[k].push(col);
            sigma2_cols[k].push(sigma2_col.clone());
        }
    }

    let panels = config
        .taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| VaRPanel {
            timestamps: timestamps.clone(),
            realized_returns: realized.clone(),
            tau,
            model_ids: kept_ids.clone(),
            var: std::mem::take(&mut var_cols[k]),
            sigma2_hat: std::mem::take(&mut sigma2_cols[k]),
        })
        .collect();
    Ok(RollingOutput { panels, excluded })
}

fn slice_regressors(regressors: &RegressorSet, from: usize, to: usize) -> RegressorSet {
    RegressorSet {
        kind: regressors.kind,
        columns: regressors
            .columns
            .iter()
            .map(|c| c[from..to].to_vec())
            .collect(),
    }
}

fn regressor_row(regressors: &RegressorSet, t: usize) -> Vec<f64> {
    regressors.columns.iter().map(|c| c[t]).collect()
}
