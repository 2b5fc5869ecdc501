//! Conditional mean/variance filters: AR(1) mean with GARCH(1,1),
//! EGARCH(1,1) or GJR-GARCH(1,1) variance, optional exogenous regressors in
//! the variance equation, likelihood evaluation and simulation.

use serde::{Deserialize, Serialize};

use crate::dist::{ErrorLaw, LawKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dynamics {
    Garch,
    Egarch,
    Gjr,
}

impl Dynamics {
    pub fn label(&self) -> &'static str {
        match self {
            Dynamics::Garch => "garch",
            Dynamics::Egarch => "egarch",
            Dynamics::Gjr => "gjr",
        }
    }

    /// Whether the dynamics has a leverage parameter gamma.
    pub fn has_leverage(&self) -> bool {
        !matches!(self, Dynamics::Garch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegressorKind {
    /// No exogenous covariates.
    None,
    /// Information-volume covariates: NUMB, LAGVOL.
    InfoVolume,
    /// Sentiment covariates: POS, NEG, HIGH.
    Sentiment,
}

impl RegressorKind {
    pub fn n_columns(&self) -> usize {
        match self {
            RegressorKind::None => 0,
            RegressorKind::InfoVolume => 2,
            RegressorKind::Sentiment => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RegressorKind::None => "n",
            RegressorKind::InfoVolume => "iv",
            RegressorKind::Sentiment => "se",
        }
    }
}

/// Model identity: dynamics x error family x covariate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dynamics: Dynamics,
    pub law: LawKind,
    pub regressors: RegressorKind,
}

impl ModelSpec {
    pub fn id(&self) -> String {
        format!(
            "{}_{}_{}",
            self.dynamics.label(),
            self.law.label(),
            self.regressors.label()
        )
    }

    /// The full grid of dynamics x laws x regressor sets.
    pub fn full_grid() -> Vec<ModelSpec> {
        let mut grid = Vec::with_capacity(27);
        for dynamics in [Dynamics::Garch, Dynamics::Egarch, Dynamics::Gjr] {
            for law in [LawKind::Gaussian, LawKind::StudentT, LawKind::Ged] {
                for regressors in [
                    RegressorKind::None,
                    RegressorKind::InfoVolume,
                    RegressorKind::Sentiment,
                ] {
                    grid.push(ModelSpec {
                        dynamics,
                        law,
                        regressors,
                    });
                }
            }
        }
        grid
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

/// Exogenous covariate columns aligned one-to-one with a return series.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSet {
    pub kind: RegressorKind,
    /// Column-major: `columns[c][t]`, all non-negative.
    pub columns: Vec<Vec<f64>>,
}

impl RegressorSet {
    pub fn none() -> Self {
        Self {
            kind: RegressorKind::None,
            columns: Vec::new(),
        }
    }

    pub fn new(kind: RegressorKind, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != kind.n_columns() {
            return Err(Error::InvalidInput(format!(
                "{:?} regressor set requires {} columns, got {}",
                kind,
                kind.n_columns(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidInput(
                    "regressor columns have unequal lengths".into(),
                ));
            }
        }
        Ok(Self { kind, columns })
    }

    pub fn n_rows(&self) -> Option<usize> {
        self.columns.first().map(|c| c.len())
    }

    pub fn check_alignment(&self, n: usize) -> Result<()> {
        match self.n_rows() {
            Some(rows) if rows != n => Err(Error::InvalidInput(format!(
                "regressor rows ({rows}) do not match returns ({n})"
            ))),
            _ => Ok(()),
        }
    }

    /// Row `t` dotted with `delta`.
    fn dot(&self, delta: &[f64], t: usize) -> f64 {
        let mut acc = 0.0;
        for (c, d) in self.columns.iter().zip(delta) {
            acc += d * c[t];
        }
        acc
    }

    /// Divide every column by its standard deviation (computed over the
    /// rows), returning the scaled copy and the scale factors. Columns with
    /// zero dispersion keep scale 1.
    pub fn standardized(&self) -> (Self, Vec<f64>) {
        let mut scales = Vec::with_capacity(self.columns.len());
        let mut columns = Vec::with_capacity(self.columns.len());
        for col in &self.columns {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n.max(1.0);
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n.max(1.0);
            let sd = var.sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            columns.push(col.iter().map(|x| x / scale).collect());
            scales.push(scale);
        }
        (
            Self {
                kind: self.kind,
                columns,
            },
            scales,
        )
    }

    /// Divide columns by externally supplied scales (frozen from a fit).
    pub fn scaled_by(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} scales for {} regressor columns",
                scales.len(),
                self.columns.len()
            )));
        }
        let columns = self
            .columns
            .iter()
            .zip(scales)
            .map(|(col, &s)| col.iter().map(|x| x / s).collect())
            .collect();
        Ok(Self {
            kind: self.kind,
            columns,
        })
    }
}

/// Full parameter vector of one model. `gamma` is meaningful only for
/// EGARCH/GJR; `nu` only when the error law has a shape parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub mu: f64,
    pub phi: f64,
    pub omega: f64,
    pub delta: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub nu: Option<f64>,
}

impl ParamVector {
    /// Number of free parameters (for information criteria).
    pub fn n_free(&self, dynamics: Dynamics, law: LawKind) -> usize {
        5 + self.delta.len()
            + usize::from(dynamics.has_leverage())
            + usize::from(law.has_shape())
    }

    /// Validate the constraint set of the given dynamics/law combination.
    pub fn validate(&self, dynamics: Dynamics, law: &ErrorLaw) -> Result<()> {
        law.validate()?;
        for v in [self.mu, self.phi, self.omega, self.alpha, self.beta, self.gamma] {
            if !v.is_finite() {
                return Err(Error::Constraint("non-finite parameter".into()));
            }
        }
        if self.delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Constraint("non-finite regressor loading".into()));
        }
        if self.phi.abs() >= 1.0 {
            return Err(Error::Constraint(format!("|phi| must be < 1 (got {})", self.phi)));
        }
        match dynamics {
            Dynamics::Garch => {
                if !(self.omega > 0.0) {
                    return Err(Error::Constraint(format!("omega must be > 0 (got {})", self.omega)));
                }
                if !(0.0..1.0).contains(&self.alpha) || !(0.0..1.0).contains(&self.beta) {
                    return Err(Error::Constraint(format!(
                        "alpha, beta must lie in [0,1) (got {}, {})",
                        self.alpha, self.beta
                    )));
                }
                if self.alpha + self.beta >= 1.0 {
                    return Err(Error::Constraint(format!(
                        "alpha + beta must be < 1 (got {})",
                        self.alpha + self.beta
                    )));
                }
                if self.delta.iter().any(|&d| d < 0.0) {
                    return Err(Error::Constraint(
                        "regressor loadings must be >= 0 for GARCH".into(),
                    ));
                }
            }
            Dynamics::Gjr => {
                if !(self.omega > 0.0) {
                    return Err(Error::Constraint(format!("omega must be > 0 (got {})", self.omega)));
                }
                if !(0.0..1.0).contains(&self.alpha)
                    || !(0.0..1.0).contains(&self.beta)
                    || !(0.0..1.0).contains(&self.gamma)
                {
                    return Err(Error::Constraint(format!(
                        "alpha, beta, gamma must lie in [0,1) (got {}, {}, {})",
                        self.alpha, self.beta, self.gamma
                    )));
                }
                let p_neg = law.prob_negative()?;
                if self.alpha + self.beta + self.gamma * p_neg >= 1.0 {
                    return Err(Error::Constraint(format!(
                        "alpha + beta + gamma P(z<0) must be < 1 (got {})",
                        self.alpha + self.beta + self.gamma * p_neg
                    )));
                }
                if self.delta.iter().any(|&d| d < 0.0) {
                    return Err(Error::Constraint(
                        "regressor loadings must be >= 0 for GJR".into(),
                    ));
                }
            }
            Dynamics::Egarch => {
                if self.beta.abs() >= 1.0 {
                    return Err(Error::Constraint(format!(
                        "|beta| must be < 1 for EGARCH (got {})",
                        self.beta
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Output of the variance filter.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// Conditional variances, strictly positive.
    pub sigma2: Vec<f64>,
    /// Mean-equation residuals.
    pub eps: Vec<f64>,
    /// Standardized residuals eps / sqrt(sigma2).
    pub z: Vec<f64>,
}

impl FilterOutput {
    /// Filter state after the last observation, for one-step forecasting.
    pub fn tail(&self) -> Option<FilterState> {
        let t = self.sigma2.len().checked_sub(1)?;
        Some(FilterState {
            eps: self.eps[t],
            sigma2: self.sigma2[t],
            z: self.z[t],
        })
    }
}

/// The filter state carried between observations.
#[derive(Debug, Clone, Copy)]
pub struct FilterState {
    pub eps: f64,
    pub sigma2: f64,
    pub z: f64,
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Advance the variance recursion one step from state at t to t+1 given the
/// regressor contribution `dx_next` (already delta-weighted).
pub(crate) fn variance_step(
    dynamics: Dynamics,
    params: &ParamVector,
    abs_moment: f64,
    state: &FilterState,
    dx_next: f64,
) -> f64 {
    match dynamics {
        Dynamics::Garch => {
            params.omega + dx_next + params.alpha * state.eps * state.eps
                + params.beta * state.sigma2
        }
        Dynamics::Gjr => {
            let indicator = if state.eps <= 0.0 { 1.0 } else { 0.0 };
            params.omega
                + dx_next
                + (params.alpha + params.gamma * indicator) * state.eps * state.eps
                + params.beta * state.sigma2
        }
        Dynamics::Egarch => {
            let g = params.alpha * state.z + params.gamma * (state.z.abs() - abs_moment);
            (params.omega + dx_next + g + params.beta * state.sigma2.ln()).exp()
        }
    }
}

/// Run the mean/variance filter over a return series.
///
/// Initialization: the pre-sample return is the sample mean, so
/// eps\[0\] = r\[0\] - mu - phi * mean(r); sigma2\[0\] is the sample variance of the
/// returns. Regressor rows enter contemporaneously with the bar they label.
pub fn filter(
    dynamics: Dynamics,
    law: &ErrorLaw,
    params: &ParamVector,
    returns: &[f64],
    regressors: &RegressorSet,
) -> Result<FilterOutput> {
    params.validate(dynamics, law)?;
    regressors.check_alignment(returns.len())?;
    if params.delta.len() != regressors.columns.len() {
        return Err(Error::InvalidInput(format!(
            "{} regressor loadings for {} columns",
            params.delta.len(),
            regressors.columns.len()
        )));
    }
    let n = returns.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "filter needs at least 2 observations".into(),
        ));
    }

    let abs_moment = law.abs_moment()?;
    let r_mean = returns.iter().sum::<f64>() / n as f64;
    let var0 = population_variance(returns).max(1e-12);

    let mut sigma2 = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut z = vec![0.0; n];

    sigma2[0] = var0;
    eps[0] = returns[0] - params.mu - params.phi * r_mean;
    z[0] = eps[0] / sigma2[0].sqrt();

    for t in 1..n {
        let state = FilterState {
            eps: eps[t - 1],
            sigma2: sigma2[t - 1],
            z: z[t - 1],
        };
        let dx = regressors.dot(&params.delta, t);
        let s2 = variance_step(dynamics, params, abs_moment, &state, dx);
        if !s2.is_finite() || s2 <= 0.0 {
            return Err(Error::NonFinite {
                index: t,
                message: format!("conditional variance {s2}"),
            });
        }
        sigma2[t] = s2;
        eps[t] = returns[t] - params.mu - params.phi * returns[t - 1];
        z[t] = eps[t] / s2.sqrt();
    }
    Ok(FilterOutput { sigma2, eps, z })
}

/// Log-likelihood of the return series under the model:
/// sum over t of log pdf(z_t) - 0.5 ln sigma2_t.
pub fn log_likelihood(
    dynamics: Dynamics,
    law: &ErrorLaw,
    params: &ParamVector,
    returns: &[f64],
    regressors: &RegressorSet,
) -> Result<f64> {
    let out = filter(dynamics, law, params, returns, regressors)?;
    let mut ll = 0.0;
    for t in 0..returns.len() {
        ll += law.log_pdf(out.z[t])? - 0.5 * out.sigma2[t].ln();
    }
    if !ll.is_finite() {
        return Err(Error::NonFinite {
            index: returns.len(),
            message: "log-likelihood".into(),
        });
    }
    Ok(ll)
}

/// Simulate a return path from the exact data-generating recursion.
///
/// The variance starts at its stationary point given the first regressor row
/// (ln of it for EGARCH) and the pre-sample return at the AR(1) mean
/// mu / (1 - phi). Deterministic for a given seed.
pub fn simulate(
    dynamics: Dynamics,
    law: &ErrorLaw,
    params: &ParamVector,
    n: usize,
    seed: u64,
    regressors: &RegressorSet,
) -> Result<Vec<f64>> {
    params.validate(dynamics, law)?;
    regressors.check_alignment(n)?;
    if params.delta.len() != regressors.columns.len() {
        return Err(Error::InvalidInput(format!(
            "{} regressor loadings for {} columns",
            params.delta.len(),
            regressors.columns.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("simulation needs n >= 2".into()));
    }

    let abs_moment = law.abs_moment()?;
    let shocks = law.sample(seed, n)?;
    let dx0 = regressors.dot(&params.delta, 0);
    let mut sigma2_t = match dynamics {
        Dynamics::Garch => (params.omega + dx0) / (1.0 - params.alpha - params.beta),
        Dynamics::Gjr => {
            let p_neg = law.prob_negative()?;
            (params.omega + dx0)
                / (1.0 - params.alpha - params.beta - params.gamma * p_neg)
        }
        Dynamics::Egarch => ((params.omega + dx0) / (1.0 - params.beta)).exp(),
    };
    if !sigma2_t.is_finite() || sigma2_t <= 0.0 {
        return Err(Error::NonFinite {
            index: 0,
            message: format!("initial variance {sigma2_t}"),
        });
    }

    let mut returns = Vec::with_capacity(n);
    let mut r_prev = params.mu / (1.0 - params.phi);
    let mut eps_prev;
    let mut z_prev;
    // t = 0
    let sd = sigma2_t.sqrt();
    let eps = sd * shocks[0];
    let r = params.mu + params.phi * r_prev + eps;
    returns.push(r);
    r_prev = r;
    eps_prev = eps;
    z_prev = shocks[0];

    for t in 1..n {
        let state = FilterState {
            eps: eps_prev,
            sigma2: sigma2_t,
            z: z_prev,
        };
        let dx = regressors.dot(&params.delta, t);
        sigma2_t = variance_step(dynamics, params, abs_moment, &state, dx);
        if !sigma2_t.is_finite() || sigma2_t <= 0.0 {
            return Err(Error::NonFinite {
                index: t,
                message: format!("conditional variance {sigma2_t}"),
            });
        }
        let eps = sigma2_t.sqrt() * shocks[t];
        let r = params.mu + params.phi * r_prev + eps;
        returns.push(r);
        r_prev = r;
        eps_prev = eps;
        z_prev = shocks[t];
    }
    Ok(returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn garch_params(omega: f64, alpha: f64, beta: f64) -> ParamVector {
        ParamVector {
            mu: 0.0,
            phi: 0.0,
            omega,
            delta: vec![],
            alpha,
            beta,
            gamma: 0.0,
            nu: None,
        }
    }

    #[test]
    fn degenerate_recursion_constant_variance() {
        let params = garch_params(0.07, 0.0, 0.0);
        let returns: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64 - 5.0) / 20.0).collect();
        let out = filter(
            Dynamics::Garch,
            &ErrorLaw::Gaussian,
            &params,
            &returns,
            &RegressorSet::none(),
        )
        .unwrap();
        for &s2 in &out.sigma2[1..] {
            assert!((s2 - 0.07).abs() < 1e-15);
        }
    }

    #[test]
    fn garch_one_step_arithmetic() {
        // omega=0.1, alpha=0.1, beta=0.8, eps2_prev=1, sigma2_prev=1 -> 1.0
        let params = garch_params(0.1, 0.1, 0.8);
        let state = FilterState {
            eps: 1.0,
            sigma2: 1.0,
            z: 1.0,
        };
        let s2 = variance_step(Dynamics::Garch, &params, 0.8, &state, 0.0);
        assert!((s2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gjr_indicator_asymmetry() {
        let params = ParamVector {
            gamma: 0.3,
            ..garch_params(0.1, 0.1, 0.5)
        };
        let c = 0.7;
        let neg = variance_step(
            Dynamics::Gjr,
            &params,
            0.8,
            &FilterState { eps: -c, sigma2: 1.0, z: -c },
            0.0,
        );
        let pos = variance_step(
            Dynamics::Gjr,
            &params,
            0.8,
            &FilterState { eps: c, sigma2: 1.0, z: c },
            0.0,
        );
        assert!((neg - pos - params.gamma * c * c).abs() < 1e-15);
    }

    #[test]
    fn egarch_zero_shock_step() {
        let params = ParamVector {
            mu: 0.0,
            phi: 0.0,
            omega: -0.1,
            delta: vec![],
            alpha: 0.05,
            beta: 0.9,
            gamma: 0.15,
            nu: None,
        };
        let e_abs = ErrorLaw::Gaussian.abs_moment().unwrap();
        let state = FilterState { eps: 0.0, sigma2: 1.3, z: 0.0 };
        let s2 = variance_step(Dynamics::Egarch, &params, e_abs, &state, 0.0);
        let expected = (params.omega - params.gamma * e_abs + params.beta * 1.3f64.ln()).exp();
        assert!((s2 - expected).abs() < 1e-15);
    }

    #[test]
    fn egarch_deterministic_log_ar1_when_alpha_gamma_zero() {
        let params = ParamVector {
            mu: 0.0,
            phi: 0.0,
            omega: -0.2,
            delta: vec![],
            alpha: 0.0,
            beta: 0.85,
            gamma: 0.0,
            nu: None,
        };
        let returns: Vec<f64> = (0..200)
            .map(|i| 0.01 * ((i as f64) * 0.7).sin())
            .collect();
        let out = filter(
            Dynamics::Egarch,
            &ErrorLaw::Gaussian,
            &params,
            &returns,
            &RegressorSet::none(),
        )
        .unwrap();
        // closed-form iteration of ln sigma2
        let mut ln_s2 = population_variance(&returns).max(1e-12).ln();
        for t in 1..returns.len() {
            ln_s2 = params.omega + params.beta * ln_s2;
            assert!((out.sigma2[t].ln() - ln_s2).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn loglik_collapses_to_iid_gaussian() {
        let returns: Vec<f64> = ErrorLaw::Gaussian.sample(11, 500).unwrap();
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let var = population_variance(&returns);
        let params = ParamVector {
            mu: mean,
            ..garch_params(var, 0.0, 0.0)
        };
        let ll = log_likelihood(
            Dynamics::Garch,
            &ErrorLaw::Gaussian,
            &params,
            &returns,
            &RegressorSet::none(),
        )
        .unwrap();
        let iid: f64 = returns
            .iter()
            .map(|r| {
                let z = (r - mean) / var.sqrt();
                -0.5 * crate::special::LN_2PI - 0.5 * z * z - 0.5 * var.ln()
            })
            .sum();
        assert!((ll - iid).abs() < 1e-9, "ll={ll} iid={iid}");
    }

    #[test]
    fn loglik_invariant_to_regressor_permutation() {
        let n = 300;
        let returns: Vec<f64> = ErrorLaw::Gaussian.sample(3, n).unwrap();
        let col_a: Vec<f64> = (0..n).map(|t| (t % 7) as f64).collect();
        let col_b: Vec<f64> = (0..n).map(|t| ((t * 3) % 5) as f64).collect();
        let reg_ab = RegressorSet::new(RegressorKind::InfoVolume, vec![col_a.clone(), col_b.clone()]).unwrap();
        let reg_ba = RegressorSet::new(RegressorKind::InfoVolume, vec![col_b, col_a]).unwrap();
        let base = garch_params(0.05, 0.05, 0.8);
        let p_ab = ParamVector { delta: vec![0.01, 0.02], ..base.clone() };
        let p_ba = ParamVector { delta: vec![0.02, 0.01], ..base };
        let ll_ab =
            log_likelihood(Dynamics::Garch, &ErrorLaw::Gaussian, &p_ab, &returns, &reg_ab).unwrap();
        let ll_ba =
            log_likelihood(Dynamics::Garch, &ErrorLaw::Gaussian, &p_ba, &returns, &reg_ba).unwrap();
        assert!((ll_ab - ll_ba).abs() < 1e-12);
    }

    #[test]
    fn constraints_rejected() {
        let bad = garch_params(0.1, 0.6, 0.5);
        assert!(matches!(
            filter(
                Dynamics::Garch,
                &ErrorLaw::Gaussian,
                &bad,
                &[0.0, 0.1, -0.1],
                &RegressorSet::none(),
            ),
            Err(Error::Constraint(_))
        ));
        let neg_omega = garch_params(-0.1, 0.1, 0.5);
        assert!(neg_omega.validate(Dynamics::Garch, &ErrorLaw::Gaussian).is_err());
        // EGARCH allows negative omega
        let eg = ParamVector {
            omega: -0.1,
            ..garch_params(0.1, 0.05, 0.9)
        };
        assert!(eg.validate(Dynamics::Egarch, &ErrorLaw::Gaussian).is_ok());
    }

    #[test]
    fn simulate_collapse_to_ar1() {
        let params = ParamVector {
            mu: 0.5,
            phi: 0.4,
            ..garch_params(0.25, 0.0, 0.0)
        };
        let r = simulate(
            Dynamics::Garch,
            &ErrorLaw::Gaussian,
            &params,
            50_000,
            9,
            &RegressorSet::none(),
        )
        .unwrap();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        // AR(1) mean = mu / (1 - phi)
        assert!((mean - 0.5 / 0.6).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn simulate_unconditional_variance() {
        let params = garch_params(0.05, 0.10, 0.85);
        let r = simulate(
            Dynamics::Garch,
            &ErrorLaw::Gaussian,
            &params,
            100_000,
            17,
            &RegressorSet::none(),
        )
        .unwrap();
        let var = population_variance(&r);
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn simulate_deterministic() {
        let params = garch_params(0.05, 0.1, 0.8);
        let a = simulate(Dynamics::Garch, &ErrorLaw::Gaussian, &params, 100, 5, &RegressorSet::none()).unwrap();
        let b = simulate(Dynamics::Garch, &ErrorLaw::Gaussian, &params, 100, 5, &RegressorSet::none()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filtered_variance_near_unconditional() {
        let params = garch_params(0.2, 0.1, 0.7);
        let r = simulate(Dynamics::Garch, &ErrorLaw::Gaussian, &params, 40_000, 23, &RegressorSet::none()).unwrap();
        let out = filter(Dynamics::Garch, &ErrorLaw::Gaussian, &params, &r, &RegressorSet::none()).unwrap();
        let mean_s2 = out.sigma2.iter().sum::<f64>() / out.sigma2.len() as f64;
        let uncond = 0.2 / (1.0 - 0.1 - 0.7);
        assert!((mean_s2 - uncond).abs() < 0.1 * uncond, "{mean_s2} vs {uncond}");
    }
}
