//! Maximum-likelihood fitting: constraint-respecting reparameterization onto
//! Euclidean space, multi-start Nelder-Mead, information criteria.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{draw_standard_normal, ErrorLaw, LawKind};
use crate::error::{Error, Result};
use crate::model::{log_likelihood, Dynamics, ModelSpec, ParamVector, RegressorSet};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Objective value assigned to infeasible points (penalty mode).
const PENALTY: f64 = 1e12;

/// Floor used when mapping a non-negative loading to log space.
const DELTA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative likelihood-change tolerance.
    pub tolerance: f64,
    /// Number of multi-start runs.
    pub starts: usize,
    pub seed: u64,
    /// Minimum observations for a fit.
    pub min_obs: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-8,
            starts: 3,
            seed: 0,
            min_obs: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub params: ParamVector,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    /// In-sample standard deviation of each raw covariate column; forecasts
    /// must divide incoming covariates by these.
    pub regressor_scales: Vec<f64>,
    pub converged: bool,
}

impl FittedModel {
    pub fn law(&self) -> Result<ErrorLaw> {
        self.spec.law.with_shape(self.params.nu)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    let s = if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    };
    s.clamp(1e-12, 1.0 - 1e-12)
}

fn atanh_clamped(x: f64) -> f64 {
    let x = x.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    0.5 * ((1.0 + x) / (1.0 - x)).ln()
}

fn tanh_clamped(u: f64) -> f64 {
    u.tanh().clamp(-1.0 + 1e-12, 1.0 - 1e-12)
}

/// Number of unconstrained coordinates for a model shape.
pub fn unconstrained_len(dynamics: Dynamics, law: LawKind, n_delta: usize) -> usize {
    5 + usize::from(dynamics.has_leverage()) + n_delta + usize::from(law.has_shape())
}

/// Map a constrained parameter vector onto Euclidean space.
///
/// Layout: mu, phi, omega, two persistence coordinates (GARCH/GJR) or
/// alpha/beta (EGARCH), gamma when present, the regressor loadings, and the
/// shape when present. Positive parameters go through log, box and simplex
/// constraints through logistic maps (the GARCH persistence alpha + beta < 1
/// via a two-stage logistic; the GJR budget additionally shrinks by
/// gamma P(z < 0)).
pub fn to_unconstrained(
    params: &ParamVector,
    dynamics: Dynamics,
    law: &ErrorLaw,
) -> Result<Vec<f64>> {
    params.validate(dynamics, law)?;
    let mut u = vec![params.mu, atanh_clamped(params.phi)];
    match dynamics {
        Dynamics::Garch => {
            u.push(params.omega.ln());
            let s = params.alpha + params.beta;
            u.push(logit(s));
            u.push(logit(if s > 0.0 { params.alpha / s } else { 0.5 }));
        }
        Dynamics::Gjr => {
            u.push(params.omega.ln());
            let p_neg = law.prob_negative()?;
            let budget = 1.0 - params.gamma * p_neg;
            let s = params.alpha + params.beta;
            u.push(logit(s / budget));
            u.push(logit(if s > 0.0 { params.alpha / s } else { 0.5 }));
            u.push(logit(params.gamma));
        }
        Dynamics::Egarch => {
            u.push(params.omega);
            u.push(params.alpha);
            u.push(atanh_clamped(params.beta));
            u.push(params.gamma);
        }
    }
    for &d in &params.delta {
        match dynamics {
            Dynamics::Egarch => u.push(d),
            _ => u.push(d.max(DELTA_FLOOR).ln()),
        }
    }
    match law.kind() {
        LawKind::Gaussian => {}
        LawKind::StudentT => {
            let nu = law.shape().expect("student-t has shape");
            u.push((nu - 2.0).max(1e-15).ln());
        }
        LawKind::Ged => {
            let nu = law.shape().expect("ged has shape");
            u.push(nu.ln());
        }
    }
    Ok(u)
}

/// Inverse of [`to_unconstrained`]; total on all of Euclidean space.
pub fn from_unconstrained(
    u: &[f64],
    dynamics: Dynamics,
    law_kind: LawKind,
    n_delta: usize,
    p_neg: f64,
) -> Result<ParamVector> {
    let expected = unconstrained_len(dynamics, law_kind, n_delta);
    if u.len() != expected {
        return Err(Error::InvalidInput(format!(
            "unconstrained vector has {} coordinates; expected {expected}",
            u.len()
        )));
    }
    let mu = u[0];
    let phi = tanh_clamped(u[1]);
    let mut idx = 2;
    let (omega, alpha, beta, gamma);
    match dynamics {
        Dynamics::Garch => {
            omega = u[idx].clamp(-700.0, 700.0).exp();
            let s = sigmoid(u[idx + 1]);
            let share = sigmoid(u[idx + 2]);
            alpha = s * share;
            beta = s * (1.0 - share);
            gamma = 0.0;
            idx += 3;
        }
        Dynamics::Gjr => {
            omega = u[idx].clamp(-700.0, 700.0).exp();
            gamma = sigmoid(u[idx + 3]);
            let budget = 1.0 - gamma * p_neg;
            let s = sigmoid(u[idx + 1]) * budget;
            let share = sigmoid(u[idx + 2]);
            alpha = s * share;
            beta = s * (1.0 - share);
            idx += 4;
        }
        Dynamics::Egarch => {
            omega = u[idx];
            alpha = u[idx + 1];
            beta = tanh_clamped(u[idx + 2]);
            gamma = u[idx + 3];
            idx += 4;
        }
    }
    let mut delta = Vec::with_capacity(n_delta);
    for k in 0..n_delta {
        let v = u[idx + k];
        match dynamics {
            Dynamics::Egarch => delta.push(v),
            _ => delta.push(v.clamp(-700.0, 700.0).exp()),
        }
    }
    idx += n_delta;
    let nu = match law_kind {
        LawKind::Gaussian => None,
        // clamps keep the shape strictly inside its numeric domain for any
        // coordinate; the bounds are far outside any plausible fit
        LawKind::StudentT => Some(2.0 + u[idx].clamp(-13.0, 16.0).exp()),
        LawKind::Ged => Some(u[idx].clamp(-1.6, 5.0).exp()),
    };
    Ok(ParamVector {
        mu,
        phi,
        omega,
        delta,
        alpha,
        beta,
        gamma,
        nu,
    })
}

fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..n {
        let d = xs[t] - mean;
        den += d * d;
        if t > 0 {
            num += d * (xs[t - 1] - mean);
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Canonical starting point: moments of the data plus conventional
/// persistence values.
fn canonical_start(
    dynamics: Dynamics,
    law_kind: LawKind,
    n_delta: usize,
    returns: &[f64],
) -> ParamVector {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).max(1e-12);
    let phi = lag1_autocorrelation(returns).clamp(-0.5, 0.5);
    let beta = 0.90;
    let omega = match dynamics {
        Dynamics::Egarch => (1.0 - beta) * var.ln(),
        _ => 0.05 * var,
    };
    // positive loadings start just off their boundary so log space is usable
    let delta0 = match dynamics {
        Dynamics::Egarch => 0.0,
        _ => 1e-4 * var,
    };
    ParamVector {
        mu: mean,
        phi,
        omega,
        delta: vec![delta0; n_delta],
        alpha: 0.05,
        beta,
        gamma: if dynamics.has_leverage() { 0.05 } else { 0.0 },
        nu: match law_kind {
            LawKind::Gaussian => None,
            LawKind::StudentT => Some(8.0),
            LawKind::Ged => Some(1.5),
        },
    }
}

fn param_norm(p: &ParamVector) -> f64 {
    let mut acc = p.mu * p.mu
        + p.phi * p.phi
        + p.omega * p.omega
        + p.alpha * p.alpha
        + p.beta * p.beta
        + p.gamma * p.gamma;
    for d in &p.delta {
        acc += d * d;
    }
    if let Some(nu) = p.nu {
        acc += nu * nu;
    }
    acc.sqrt()
}

/// Maximum-likelihood fit of one model specification.
///
/// Covariate columns are standardized by their in-sample dispersion before
/// entering the filter; the scales are recorded so forecasts can reuse them.
/// The best of `config.starts` perturbed restarts wins, ties broken by the
/// smaller parameter norm. `converged` is false when the winning run stopped
/// on iteration exhaustion.
pub fn fit(
    spec: ModelSpec,
    regressors: &RegressorSet,
    returns: &[f64],
    config: &FitConfig,
) -> Result<FittedModel> {
    if returns.len() < config.min_obs {
        return Err(Error::InvalidInput(format!(
            "fit requires at least {} observations (got {})",
            config.min_obs,
            returns.len()
        )));
    }
    regressors.check_alignment(returns.len())?;
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    // relative threshold: rounding noise on a constant series is not variance
    if var <= 0.0 || var < mean * mean * 1e-26 {
        return Err(Error::Degenerate("zero-variance returns".into()));
    }

    let (scaled_regs, scales) = regressors.standardized();
    let n_delta = scaled_regs.columns.len();
    // P(z < 0) enters the GJR budget; it is 0.5 for every symmetric law and
    // does not depend on the shape parameter, so the reference law suffices.
    let p_neg = 0.5;

    let start = canonical_start(spec.dynamics, spec.law, n_delta, returns);
    let start_law = spec.law.with_shape(start.nu)?;
    let u0 = to_unconstrained(&start, spec.dynamics, &start_law)?;

    let objective = |u: &[f64]| -> f64 {
        let params = match from_unconstrained(u, spec.dynamics, spec.law, n_delta, p_neg) {
            Ok(p) => p,
            Err(_) => return PENALTY,
        };
        let law = match spec.law.with_shape(params.nu) {
            Ok(l) => l,
            Err(_) => return PENALTY,
        };
        match log_likelihood(spec.dynamics, &law, &params, returns, &scaled_regs) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => PENALTY,
        }
    };

    let opts = NelderMeadOptions {
        max_iterations: config.max_iterations,
        f_tolerance: config.tolerance,
        x_tolerance: 1e-6,
        initial_step: 0.1,
    };

    let mut best: Option<(f64, ParamVector, bool, f64)> = None; // (-ll, params, converged, norm)
    for s in 0..config.starts.max(1) {
        let u_start = if s == 0 {
            u0.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(s as u64));
            u0.iter()
                .map(|&v| v + 0.3 * draw_standard_normal(&mut rng))
                .collect()
        };
        let res = nelder_mead(&objective, &u_start, &opts);
        if res.fx >= PENALTY {
            continue;
        }
        let params = from_unconstrained(&res.x, spec.dynamics, spec.law, n_delta, p_neg)?;
        let norm = param_norm(&params);
        let better = match &best {
            None => true,
            Some((fx, _, _, bnorm)) => {
                res.fx < fx - 1e-12 || ((res.fx - fx).abs() <= 1e-12 && norm < *bnorm)
            }
        };
        if better {
            best = Some((res.fx, params, res.converged, norm));
        }
    }

    let (neg_ll, params, converged, _) = best
        .ok_or_else(|| Error::NoConvergence("all starts diverged".into()))?;
    let loglik = -neg_ll;
    let k = params.n_free(spec.dynamics, spec.law) as f64;
    let n_obs = returns.len();
    Ok(FittedModel {
        spec,
        params,
        loglik,
        aic: 2.0 * k - 2.0 * loglik,
        bic: k * (n_obs as f64).ln() - 2.0 * loglik,
        n_obs,
        regressor_scales: scales,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegressorKind;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    fn roundtrip(p: &ParamVector, dynamics: Dynamics, law: &ErrorLaw) {
        let u = to_unconstrained(p, dynamics, law).unwrap();
        let q = from_unconstrained(&u, dynamics, law.kind(), p.delta.len(), 0.5).unwrap();
        assert!(close(p.mu, q.mu, 1e-10), "mu {} vs {}", p.mu, q.mu);
        assert!(close(p.phi, q.phi, 1e-10), "phi {} vs {}", p.phi, q.phi);
        assert!(close(p.omega, q.omega, 1e-10 * p.omega.abs().max(1.0)));
        assert!(close(p.alpha, q.alpha, 1e-10));
        assert!(close(p.beta, q.beta, 1e-10));
        assert!(close(p.gamma, q.gamma, 1e-10));
        for (a, b) in p.delta.iter().zip(&q.delta) {
            assert!(close(*a, *b, 1e-10 * a.abs().max(1.0)));
        }
        match (p.nu, q.nu) {
            (Some(a), Some(b)) => assert!(close(a, b, 1e-8 * a.abs().max(1.0))),
            (None, None) => {}
            other => panic!("shape mismatch {other:?}"),
        }
    }

    #[test]
    fn transform_round_trips() {
        let garch = ParamVector {
            mu: 0.001,
            phi: -0.2,
            omega: 0.05,
            delta: vec![0.01, 0.3],
            alpha: 0.07,
            beta: 0.9,
            gamma: 0.0,
            nu: None,
        };
        roundtrip(&garch, Dynamics::Garch, &ErrorLaw::Gaussian);

        let gjr = ParamVector {
            beta: 0.85,
            gamma: 0.08,
            nu: Some(6.0),
            ..garch.clone()
        };
        roundtrip(&gjr, Dynamics::Gjr, &ErrorLaw::StudentT { nu: 6.0 });

        let egarch = ParamVector {
            mu: -0.01,
            phi: 0.3,
            omega: -0.2,
            delta: vec![-0.5, 0.7],
            alpha: -0.1,
            beta: 0.95,
            gamma: 0.2,
            nu: Some(1.4),
        };
        roundtrip(&egarch, Dynamics::Egarch, &ErrorLaw::Ged { nu: 1.4 });
    }

    #[test]
    fn near_boundary_maps_to_finite_coordinates() {
        let p = ParamVector {
            mu: 0.0,
            phi: 0.0,
            omega: 0.01,
            delta: vec![],
            alpha: 0.5 - 5e-10,
            beta: 0.5 - 5e-10,
            gamma: 0.0,
            nu: None,
        };
        let u = to_unconstrained(&p, Dynamics::Garch, &ErrorLaw::Gaussian).unwrap();
        assert!(u.iter().all(|v| v.is_finite()), "{u:?}");
        // the persistence coordinate is large but nowhere near overflow
        assert!(u[3] > 10.0 && u[3] < 50.0, "{}", u[3]);
    }

    #[test]
    fn from_unconstrained_is_total() {
        // extreme coordinates still give valid parameters
        for dynamics in [Dynamics::Garch, Dynamics::Gjr, Dynamics::Egarch] {
            for law in [LawKind::Gaussian, LawKind::StudentT, LawKind::Ged] {
                let len = unconstrained_len(dynamics, law, 2);
                for fill in [-50.0, -1.0, 0.0, 1.0, 50.0] {
                    let u = vec![fill; len];
                    let p = from_unconstrained(&u, dynamics, law, 2, 0.5).unwrap();
                    let resolved = law.with_shape(p.nu).unwrap();
                    p.validate(dynamics, &resolved).unwrap();
                }
            }
        }
    }

    #[test]
    fn fit_recovers_garch_parameters() {
        let truth = ParamVector {
            mu: 0.0,
            phi: 0.0,
            omega: 0.05,
            delta: vec![],
            alpha: 0.10,
            beta: 0.85,
            gamma: 0.0,
            nu: None,
        };
        let spec = ModelSpec {
            dynamics: Dynamics::Garch,
            law: LawKind::Gaussian,
            regressors: RegressorKind::None,
        };
        let r = crate::model::simulate(
            spec.dynamics,
            &ErrorLaw::Gaussian,
            &truth,
            5000,
            101,
            &RegressorSet::none(),
        )
        .unwrap();
        let fitted = fit(
            spec,
            &RegressorSet::none(),
            &r,
            &FitConfig {
                starts: 2,
                seed: 7,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            (fitted.params.alpha - 0.10).abs() < 0.06,
            "alpha {}",
            fitted.params.alpha
        );
        assert!(
            (fitted.params.beta - 0.85).abs() < 0.06,
            "beta {}",
            fitted.params.beta
        );
        // information criteria formulas
        let k = fitted.params.n_free(spec.dynamics, spec.law) as f64;
        assert!(close(fitted.aic, 2.0 * k - 2.0 * fitted.loglik, 1e-12));
        assert!(close(
            fitted.bic,
            k * (fitted.n_obs as f64).ln() - 2.0 * fitted.loglik,
            1e-12
        ));
    }

    #[test]
    fn fit_iid_gaussian_collapses() {
        let r = ErrorLaw::Gaussian.sample(55, 2000).unwrap();
        let spec = ModelSpec {
            dynamics: Dynamics::Garch,
            law: LawKind::Gaussian,
            regressors: RegressorKind::None,
        };
        let fitted = fit(spec, &RegressorSet::none(), &r, &FitConfig::default()).unwrap();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let iid_ll: f64 = r
            .iter()
            .map(|x| {
                let z = (x - mean) / var.sqrt();
                -0.5 * crate::special::LN_2PI - 0.5 * z * z - 0.5 * var.ln()
            })
            .sum();
        // either the ARCH terms vanish or the likelihood matches i.i.d.
        assert!(
            fitted.params.alpha + fitted.params.beta < 0.5 || (fitted.loglik - iid_ll).abs() < 2.0,
            "alpha+beta = {}, ll diff = {}",
            fitted.params.alpha + fitted.params.beta,
            fitted.loglik - iid_ll
        );
        assert!(fitted.loglik >= iid_ll - 2.0);
    }

    #[test]
    fn fit_loglik_not_below_canonical_start() {
        // the optimizer must never return something worse than its own
        // documented starting point
        let truth = ParamVector {
            mu: 0.01,
            phi: 0.1,
            omega: 0.1,
            delta: vec![],
            alpha: 0.08,
            beta: 0.8,
            gamma: 0.0,
            nu: None,
        };
        let r = crate::model::simulate(
            Dynamics::Garch,
            &ErrorLaw::Gaussian,
            &truth,
            1500,
            77,
            &RegressorSet::none(),
        )
        .unwrap();
        let spec = ModelSpec {
            dynamics: Dynamics::Garch,
            law: LawKind::Gaussian,
            regressors: RegressorKind::None,
        };
        let fitted = fit(spec, &RegressorSet::none(), &r, &FitConfig::default()).unwrap();
        let start = canonical_start(Dynamics::Garch, LawKind::Gaussian, 0, &r);
        let start_ll = crate::model::log_likelihood(
            Dynamics::Garch,
            &ErrorLaw::Gaussian,
            &start,
            &r,
            &RegressorSet::none(),
        )
        .unwrap();
        assert!(
            fitted.loglik >= start_ll,
            "fit {} below start {}",
            fitted.loglik,
            start_ll
        );
    }

    #[test]
    fn fit_recovers_student_t_shape() {
        let truth = ParamVector {
            mu: 0.0,
            phi: 0.0,
            omega: 0.05,
            delta: vec![],
            alpha: 0.10,
            beta: 0.85,
            gamma: 0.0,
            nu: Some(5.0),
        };
        let spec = ModelSpec {
            dynamics: Dynamics::Garch,
            law: LawKind::StudentT,
            regressors: RegressorKind::None,
        };
        let r = crate::model::simulate(
            spec.dynamics,
            &ErrorLaw::StudentT { nu: 5.0 },
            &truth,
            5000,
            303,
            &RegressorSet::none(),
        )
        .unwrap();
        let fitted = fit(
            spec,
            &RegressorSet::none(),
            &r,
            &FitConfig {
                starts: 2,
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let nu_hat = fitted.params.nu.unwrap();
        assert!((3.5..=7.5).contains(&nu_hat), "nu_hat = {nu_hat}");
    }

    #[test]
    fn fit_rejects_short_and_degenerate_data() {
        let spec = ModelSpec {
            dynamics: Dynamics::Garch,
            law: LawKind::Gaussian,
            regressors: RegressorKind::None,
        };
        let short = vec![0.01; 50];
        assert!(fit(spec, &RegressorSet::none(), &short, &FitConfig::default()).is_err());
        let flat = vec![0.01; 500];
        assert!(matches!(
            fit(spec, &RegressorSet::none(), &flat, &FitConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
