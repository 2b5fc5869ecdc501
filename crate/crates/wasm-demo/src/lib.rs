//! Browser bindings for three interactive views: the standardized innovation
//! densities, a GARCH-family path simulator with VaR band and violation
//! diagnostics, and the dynamic forecast-combination weights.
//!
//! The exported functions are thin wrappers over plain-Rust helpers so the
//! logic stays testable on the host target.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use varcast_core::backtest;
use varcast_core::combine::{self, KernelSign};
use varcast_core::dist::ErrorLaw;
use varcast_core::error::{Error, Result};
use varcast_core::forecast::VaRPanel;
use varcast_core::model::{filter, simulate, Dynamics, ParamVector, RegressorSet};

fn parse_law(law: &str, nu: f64) -> Result<ErrorLaw> {
    let law = match law {
        "gauss" => ErrorLaw::Gaussian,
        "t" => ErrorLaw::StudentT { nu },
        "ged" => ErrorLaw::Ged { nu },
        other => {
            return Err(Error::InvalidInput(format!("unknown law `{other}`")))
        }
    };
    law.validate()?;
    Ok(law)
}

fn parse_dynamics(dynamics: &str) -> Result<Dynamics> {
    match dynamics {
        "garch" => Ok(Dynamics::Garch),
        "egarch" => Ok(Dynamics::Egarch),
        "gjr" => Ok(Dynamics::Gjr),
        other => Err(Error::InvalidInput(format!("unknown dynamics `{other}`"))),
    }
}

/// Density curve on [z_min, z_max]: n points, returned as [z0, f0, z1, f1, ...].
pub fn density_curve_impl(law: &str, nu: f64, z_min: f64, z_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(z_max > z_min) || n < 2 {
        return Err(Error::InvalidInput("need z_max > z_min and n >= 2".into()));
    }
    let law = parse_law(law, nu)?;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let z = z_min + (z_max - z_min) * i as f64 / (n - 1) as f64;
        out.push(z);
        out.push(law.pdf(z)?);
    }
    Ok(out)
}

pub fn quantile_impl(law: &str, nu: f64, tau: f64) -> Result<f64> {
    parse_law(law, nu)?.quantile(tau)
}

#[derive(Serialize)]
struct PathDemo {
    returns: Vec<f64>,
    sigma: Vec<f64>,
    var: Vec<f64>,
    hits: Vec<usize>,
    n_hits: usize,
    ae_ratio: f64,
    kupiec_stat: f64,
    kupiec_pvalue: f64,
    uncond_sd: f64,
}

/// Simulate a path from the chosen model, filter it back, and overlay the
/// one-step VaR band at level tau. JSON out.
#[allow(clippy::too_many_arguments)]
pub fn simulate_var_path_impl(
    dynamics: &str,
    law: &str,
    nu: f64,
    mu: f64,
    phi: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    n: usize,
    seed: u64,
    tau: f64,
) -> Result<String> {
    let dynamics = parse_dynamics(dynamics)?;
    let law = parse_law(law, nu)?;
    let params = ParamVector {
        mu,
        phi,
        omega,
        delta: vec![],
        alpha,
        beta,
        gamma: if dynamics.has_leverage() { gamma } else { 0.0 },
        nu: law.shape(),
    };
    if n < 50 || n > 20_000 {
        return Err(Error::InvalidInput("n must lie in [50, 20000]".into()));
    }
    let empty = RegressorSet::none();
    let returns = simulate(dynamics, &law, &params, n, seed, &empty)?;
    let filtered = filter(dynamics, &law, &params, &returns, &empty)?;
    let q = law.quantile(tau)?;
    let r_mean = returns.iter().sum::<f64>() / n as f64;
    // VaR for bar t from the state at t-1 (one-step-ahead, same recursion and
    // pre-sample convention the filter applies)
    let var: Vec<f64> = (0..n)
        .map(|t| {
            let prev = if t == 0 { r_mean } else { returns[t - 1] };
            mu + phi * prev + filtered.sigma2[t].sqrt() * q
        })
        .collect();
    let h = backtest::hits(&returns, &var, tau)?;
    let (kupiec_stat, kupiec_pvalue) = backtest::kupiec_uc(&h)?;
    let hits: Vec<usize> = h
        .hits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(t, _)| t)
        .collect();
    let uncond_sd = match dynamics {
        Dynamics::Garch => (omega / (1.0 - alpha - beta)).sqrt(),
        Dynamics::Gjr => (omega / (1.0 - alpha - beta - 0.5 * gamma)).sqrt(),
        Dynamics::Egarch => ((omega / (1.0 - beta)).exp()).sqrt(),
    };
    let demo = PathDemo {
        sigma: filtered.sigma2.iter().map(|s| s.sqrt()).collect(),
        returns,
        var,
        n_hits: hits.len(),
        hits,
        ae_ratio: backtest::ae_ratio(&h),
        kupiec_stat,
        kupiec_pvalue,
        uncond_sd,
    };
    serde_json::to_string(&demo).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[derive(Serialize)]
struct CombinationDemo {
    returns: Vec<f64>,
    var_true: Vec<f64>,
    var_flat: Vec<f64>,
    var_avg: Vec<f64>,
    var_dyn: Vec<f64>,
    weight_true: Vec<f64>,
    loss_true: f64,
    loss_flat: f64,
    loss_avg: f64,
    loss_dyn: f64,
}

/// Two-model combination playground: the true GARCH filter against a
/// constant-volatility benchmark, pooled with the exponential-smoothing
/// weights at a chosen smoothing coefficient. JSON out.
pub fn combination_demo_impl(
    omega: f64,
    alpha: f64,
    beta: f64,
    n: usize,
    seed: u64,
    tau: f64,
    kappa: f64,
) -> Result<String> {
    if n < 60 || n > 20_000 {
        return Err(Error::InvalidInput("n must lie in [60, 20000]".into()));
    }
    let law = ErrorLaw::Gaussian;
    let params = ParamVector {
        mu: 0.0,
        phi: 0.0,
        omega,
        delta: vec![],
        alpha,
        beta,
        gamma: 0.0,
        nu: None,
    };
    let empty = RegressorSet::none();
    let returns = simulate(Dynamics::Garch, &law, &params, n, seed, &empty)?;
    let filtered = filter(Dynamics::Garch, &law, &params, &returns, &empty)?;
    let q = law.quantile(tau)?;
    let var_true: Vec<f64> = filtered.sigma2.iter().map(|s2| s2.sqrt() * q).collect();
    let flat_var = returns.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let var_flat: Vec<f64> = vec![flat_var.sqrt() * q; n];
    let panel = VaRPanel {
        timestamps: (0..n as i64).collect(),
        realized_returns: returns.clone(),
        tau,
        model_ids: vec!["true".into(), "flat".into()],
        var: vec![var_true.clone(), var_flat.clone()],
        sigma2_hat: vec![filtered.sigma2.clone(), vec![flat_var; n]],
    };
    let weights = combine::dynamic_weights(&panel, &[kappa, kappa], KernelSign::Softmin)?;
    let var_dyn = combine::combine(&panel, &weights)?;
    let var_avg = combine::static_average(&panel)?;
    let demo = CombinationDemo {
        loss_true: combine::average_loss(&returns, &var_true, tau),
        loss_flat: combine::average_loss(&returns, &var_flat, tau),
        loss_avg: combine::average_loss(&returns, &var_avg, tau),
        loss_dyn: combine::average_loss(&returns, &var_dyn, tau),
        weight_true: weights.weights.iter().map(|row| row[0]).collect(),
        returns,
        var_true,
        var_flat,
        var_avg,
        var_dyn,
    };
    serde_json::to_string(&demo).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn to_js<T>(r: Result<T>) -> std::result::Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn density_curve(
    law: &str,
    nu: f64,
    z_min: f64,
    z_max: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsValue> {
    to_js(density_curve_impl(law, nu, z_min, z_max, n))
}

#[wasm_bindgen]
pub fn law_quantile(law: &str, nu: f64, tau: f64) -> std::result::Result<f64, JsValue> {
    to_js(quantile_impl(law, nu, tau))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_var_path(
    dynamics: &str,
    law: &str,
    nu: f64,
    mu: f64,
    phi: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    n: usize,
    seed: u64,
    tau: f64,
) -> std::result::Result<String, JsValue> {
    to_js(simulate_var_path_impl(
        dynamics, law, nu, mu, phi, omega, alpha, beta, gamma, n, seed, tau,
    ))
}

#[wasm_bindgen]
pub fn combination_demo(
    omega: f64,
    alpha: f64,
    beta: f64,
    n: usize,
    seed: u64,
    tau: f64,
    kappa: f64,
) -> std::result::Result<String, JsValue> {
    to_js(combination_demo_impl(omega, alpha, beta, n, seed, tau, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_curve_has_unit_mode_order() {
        let pts = density_curve_impl("gauss", 0.0, -4.0, 4.0, 101).unwrap();
        assert_eq!(pts.len(), 202);
        // peak at z = 0
        let mid = &pts[100..102];
        assert!((mid[0]).abs() < 1e-12);
        assert!((mid[1] - 0.3989422804014327).abs() < 1e-10);
        assert!(density_curve_impl("ged", 0.0, -4.0, 4.0, 10).is_err());
    }

    #[test]
    fn path_demo_round_trips_json() {
        let json = simulate_var_path_impl(
            "garch", "gauss", 0.0, 0.0, 0.0, 0.05, 0.1, 0.85, 0.0, 500, 42, 0.01,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["returns"].as_array().unwrap().len(), 500);
        assert_eq!(v["var"].as_array().unwrap().len(), 500);
        assert!(v["kupiec_pvalue"].as_f64().unwrap() >= 0.0);
        // deterministic
        let json2 = simulate_var_path_impl(
            "garch", "gauss", 0.0, 0.0, 0.0, 0.05, 0.1, 0.85, 0.0, 500, 42, 0.01,
        )
        .unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn combination_demo_weights_on_simplex() {
        let json = combination_demo_impl(0.05, 0.1, 0.85, 300, 7, 0.05, 0.9).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let w = v["weight_true"].as_array().unwrap();
        assert_eq!(w.len(), 300);
        for x in w {
            let x = x.as_f64().unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
        // the combined path lies in the model envelope
        let dyn_v = v["var_dyn"].as_array().unwrap();
        let a = v["var_true"].as_array().unwrap();
        let b = v["var_flat"].as_array().unwrap();
        for t in 0..300 {
            let lo = a[t].as_f64().unwrap().min(b[t].as_f64().unwrap());
            let hi = a[t].as_f64().unwrap().max(b[t].as_f64().unwrap());
            let x = dyn_v[t].as_f64().unwrap();
            assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(quantile_impl("gauss", 0.0, 0.0).is_err());
        assert!(parse_law("cauchy", 1.0).is_err());
        assert!(parse_dynamics("arch").is_err());
        assert!(simulate_var_path_impl(
            "garch", "gauss", 0.0, 0.0, 0.0, 0.05, 0.6, 0.6, 0.0, 500, 1, 0.01
        )
        .is_err());
    }
}
