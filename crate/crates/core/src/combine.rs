//! Pooling VaR forecasts from the surviving model set: static average and the
//! dynamic exponential-smoothing convex combination with per-model smoothing
//! coefficients chosen by minimizing the average quantile loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::VaRPanel;
use crate::mcs::quantile_loss;
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Smoothing coefficients live in (KAPPA_EPS, 1 - KAPPA_EPS).
const KAPPA_EPS: f64 = 1e-4;

/// Orientation of the exponent in the weighting kernel. `Softmin` gives lower
/// past loss a higher weight; `Literal` applies the kernel exactly as printed,
/// up-weighting larger losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelSign {
    Literal,
    Softmin,
}

impl Default for KernelSign {
    fn default() -> Self {
        KernelSign::Softmin
    }
}

impl KernelSign {
    pub fn as_f64(&self) -> f64 {
        match self {
            KernelSign::Literal => 1.0,
            KernelSign::Softmin => -1.0,
        }
    }

    pub fn from_f64(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(KernelSign::Literal)
        } else if v == -1.0 {
            Ok(KernelSign::Softmin)
        } else {
            Err(Error::InvalidInput(format!(
                "kernel sign must be +1 or -1 (got {v})"
            )))
        }
    }
}

/// Per-time combination weights over the surviving models.
#[derive(Debug, Clone)]
pub struct WeightSeries {
    /// `weights[t][j]`; every row lies on the simplex.
    pub weights: Vec<Vec<f64>>,
    pub kappa: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CombinedVaR {
    pub var_dyn: Vec<f64>,
    pub var_avg: Vec<f64>,
    pub kappa: Vec<f64>,
    pub sign: KernelSign,
}

/// Rowwise mean of the panel's VaR columns.
pub fn static_average(panel: &VaRPanel) -> Result<Vec<f64>> {
    let m = panel.n_models();
    if m == 0 {
        return Err(Error::InvalidInput("empty panel".into()));
    }
    let horizon = panel.horizon();
    let mut out = vec![0.0; horizon];
    for col in &panel.var {
        for (acc, v) in out.iter_mut().zip(col) {
            *acc += v;
        }
    }
    for v in &mut out {
        *v /= m as f64;
    }
    Ok(out)
}

/// Softmax of sign * loss_j / sigma_j across the models, computed with
/// max-subtraction. Sums to one.
pub fn normalized_kernel(
    r_t: f64,
    var_row: &[f64],
    sigma_row: &[f64],
    tau: f64,
    sign: KernelSign,
) -> Result<Vec<f64>> {
    if var_row.len() != sigma_row.len() || var_row.is_empty() {
        return Err(Error::InvalidInput(
            "kernel rows empty or mismatched".into(),
        ));
    }
    if sigma_row.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidInput(
            "kernel requires positive predicted deviations".into(),
        ));
    }
    let s = sign.as_f64();
    let exponents: Vec<f64> = var_row
        .iter()
        .zip(sigma_row)
        .map(|(&v, &sd)| s * quantile_loss(r_t, v, tau) / sd)
        .collect();
    let max = exponents
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// The exponential-smoothing weight recursion. Row 1 is uniform; row t + 1
/// smooths the previous row toward the kernel evaluated on the realized
/// return, the prior-step VaR forecasts and the predicted conditional
/// standard deviations sqrt(sigma2_hat). With heterogeneous kappa the raw
/// update can drift off the simplex, so every row is renormalized.
pub fn dynamic_weights(
    panel: &VaRPanel,
    kappa: &[f64],
    sign: KernelSign,
) -> Result<WeightSeries> {
    let m = panel.n_models();
    let horizon = panel.horizon();
    if kappa.len() != m {
        return Err(Error::InvalidInput(format!(
            "{} smoothing coefficients for {m} models",
            kappa.len()
        )));
    }
    if kappa.iter().any(|&k| !(k > 0.0 && k < 1.0)) {
        return Err(Error::InvalidInput(
            "smoothing coefficients must lie in (0,1)".into(),
        ));
    }
    let mut weights = Vec::with_capacity(horizon);
    weights.push(vec![1.0 / m as f64; m]);
    for t in 1..horizon {
        let var_row: Vec<f64> = (0..m).map(|j| panel.var[j][t - 1]).collect();
        let sd_row: Vec<f64> = (0..m).map(|j| panel.sigma2_hat[j][t - 1].sqrt()).collect();
        let pi = normalized_kernel(
            panel.realized_returns[t - 1],
            &var_row,
            &sd_row,
            panel.tau,
            sign,
        )?;
        let prev = &weights[t - 1];
        let mut row: Vec<f64> = (0..m)
            .map(|j| kappa[j] * prev[j] + (1.0 - kappa[j]) * pi[j])
            .collect();
        let total: f64 = row.iter().sum();
        for w in &mut row {
            *w /= total;
        }
        weights.push(row);
    }
    Ok(WeightSeries {
        weights,
        kappa: kappa.to_vec(),
    })
}

/// Rowwise convex combination of the panel's VaR columns.
pub fn combine(panel: &VaRPanel, weights: &WeightSeries) -> Result<Vec<f64>> {
    let m = panel.n_models();
    let horizon = panel.horizon();
    if weights.weights.len() != horizon {
        return Err(Error::InvalidInput(format!(
            "{} weight rows for horizon {horizon}",
            weights.weights.len()
        )));
    }
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let row = &weights.weights[t];
        if row.len() != m {
            return Err(Error::InvalidInput("weight row width mismatch".into()));
        }
        let mut acc = 0.0;
        for j in 0..m {
            acc += row[j] * panel.var[j][t];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Average quantile loss of a combined VaR path.
pub fn average_loss(realized: &[f64], var: &[f64], tau: f64) -> f64 {
    let n = realized.len().max(1) as f64;
    realized
        .iter()
        .zip(var)
        .map(|(&r, &v)| quantile_loss(r, v, tau))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone)]
pub struct KappaFit {
    pub kappa: Vec<f64>,
    pub average_loss: f64,
    pub converged: bool,
}

/// Choose the smoothing coefficients by minimizing the average quantile loss
/// of the dynamic combination over the forecast horizon. Multi-start
/// Nelder-Mead in logit space from the uniform corners 0.5, 0.9 and 0.99.
pub fn optimize_kappa(panel: &VaRPanel, sign: KernelSign) -> Result<KappaFit> {
    let m = panel.n_models();
    if m == 0 {
        return Err(Error::InvalidInput("empty panel".into()));
    }
    if panel.horizon() < 50 {
        return Err(Error::InvalidInput(format!(
            "horizon {} too short to calibrate the combination (need >= 50)",
            panel.horizon()
        )));
    }
    if m == 1 {
        // single model: kappa is irrelevant, the combination is the column
        let kappa = vec![0.5];
        let w = dynamic_weights(panel, &kappa, sign)?;
        let v = combine(panel, &w)?;
        return Ok(KappaFit {
            kappa,
            average_loss: average_loss(&panel.realized_returns, &v, panel.tau),
            converged: true,
        });
    }

    let to_kappa = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .map(|&x| {
                let s = 1.0 / (1.0 + (-x).exp());
                KAPPA_EPS + (1.0 - 2.0 * KAPPA_EPS) * s
            })
            .collect()
    };
    let objective = |u: &[f64]| -> f64 {
        let kappa = to_kappa(u);
        match dynamic_weights(panel, &kappa, sign).and_then(|w| combine(panel, &w)) {
            Ok(v) => average_loss(&panel.realized_returns, &v, panel.tau),
            Err(_) => f64::INFINITY,
        }
    };

    let logit = |k: f64| ((k - KAPPA_EPS) / (1.0 - KAPPA_EPS - k)).ln();
    let opts = NelderMeadOptions {
        max_iterations: 400 * m,
        f_tolerance: 1e-10,
        x_tolerance: 1e-7,
        initial_step: 0.5,
    };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for corner in [0.5, 0.9, 0.99] {
        let u0 = vec![logit(corner); m];
        let res = nelder_mead(&objective, &u0, &opts);
        // keep whichever of the polished point and the raw corner is better
        let corner_val = objective(&u0);
        let (fx, x) = if corner_val < res.fx {
            (corner_val, u0)
        } else {
            (res.fx, res.x)
        };
        if best.as_ref().map_or(true, |(b, _, _)| fx < *b) {
            best = Some((fx, x, res.converged));
        }
    }
    let (fx, u, converged) = best.expect("at least one start");
    Ok(KappaFit {
        kappa: to_kappa(&u),
        average_loss: fx,
        converged,
    })
}

/// Static average plus optimized dynamic combination of a panel.
pub fn combined_var(panel: &VaRPanel, sign: KernelSign) -> Result<CombinedVaR> {
    let avg = static_average(panel)?;
    let fit = optimize_kappa(panel, sign)?;
    let weights = dynamic_weights(panel, &fit.kappa, sign)?;
    let dyn_var = combine(panel, &weights)?;
    Ok(CombinedVaR {
        var_dyn: dyn_var,
        var_avg: avg,
        kappa: fit.kappa,
        sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_panel(var_cols: Vec<Vec<f64>>, realized: Vec<f64>, tau: f64) -> VaRPanel {
        let horizon = realized.len();
        let m = var_cols.len();
        VaRPanel {
            timestamps: (0..horizon as i64).collect(),
            realized_returns: realized,
            tau,
            model_ids: (0..m).map(|j| format!("m{j}")).collect(),
            sigma2_hat: vec![vec![1.0; horizon]; m],
            var: var_cols,
        }
    }

    #[test]
    fn static_average_cases() {
        let p = toy_panel(vec![vec![-1.0; 4]], vec![0.0; 4], 0.01);
        assert_eq!(static_average(&p).unwrap(), vec![-1.0; 4]);
        let p = toy_panel(vec![vec![-1.0; 3], vec![-3.0; 3]], vec![0.0; 3], 0.01);
        assert_eq!(static_average(&p).unwrap(), vec![-2.0; 3]);
        let p = toy_panel(
            vec![vec![-1.0, -2.0], vec![-2.0, -4.0], vec![-3.0, -6.0]],
            vec![0.0, 0.0],
            0.01,
        );
        assert_eq!(static_average(&p).unwrap(), vec![-2.0, -4.0]);
    }

    #[test]
    fn kernel_uniform_for_equal_inputs() {
        let w = normalized_kernel(0.3, &[-1.0, -1.0, -1.0], &[0.5, 0.5, 0.5], 0.01, KernelSign::Softmin)
            .unwrap();
        for v in &w {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_softmin_downweights_large_loss() {
        // model 1 misses badly (deep violation), model 0 is fine
        let w = normalized_kernel(-3.0, &[-3.5, -0.5], &[1.0, 1.0], 0.01, KernelSign::Softmin)
            .unwrap();
        assert!(w[0] > 0.9, "{w:?}");
        assert!(w[1] < 0.1, "{w:?}");
        // the literal sign points the other way
        let w = normalized_kernel(-3.0, &[-3.5, -0.5], &[1.0, 1.0], 0.01, KernelSign::Literal)
            .unwrap();
        assert!(w[1] > 0.9, "{w:?}");
    }

    #[test]
    fn kernel_matches_scripted_softmax() {
        let r = -1.0;
        let vars = [-2.0, -0.8, -1.1];
        let sds = [0.9, 1.1, 1.3];
        let tau = 0.05;
        let w = normalized_kernel(r, &vars, &sds, tau, KernelSign::Softmin).unwrap();
        // direct evaluation without max subtraction
        let e: Vec<f64> = vars
            .iter()
            .zip(&sds)
            .map(|(&v, &s)| (-quantile_loss(r, v, tau) / s).exp())
            .collect();
        let tot: f64 = e.iter().sum();
        for (a, b) in w.iter().zip(e.iter().map(|x| x / tot)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_uniform_for_identical_models() {
        let p = toy_panel(
            vec![vec![-1.0; 20], vec![-1.0; 20]],
            (0..20).map(|t| 0.01 * t as f64).collect(),
            0.05,
        );
        let w = dynamic_weights(&p, &[0.7, 0.7], KernelSign::Softmin).unwrap();
        for row in &w.weights {
            assert!((row[0] - 0.5).abs() < 1e-14);
            assert!((row[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn weights_pinned_near_uniform_for_kappa_near_one() {
        let p = toy_panel(
            vec![vec![-1.0; 30], vec![-2.0; 30]],
            (0..30).map(|t| -0.05 * t as f64).collect(),
            0.05,
        );
        let kappa = 1.0 - 1e-9;
        let w = dynamic_weights(&p, &[kappa, kappa], KernelSign::Softmin).unwrap();
        for row in &w.weights {
            assert!((row[0] - 0.5).abs() < 1e-6, "{row:?}");
        }
    }

    #[test]
    fn weight_recursion_replay() {
        // 2 models, 4 steps, fixed inputs: replay Eq. by hand
        let p = toy_panel(
            vec![
                vec![-1.0, -1.2, -0.9, -1.1],
                vec![-0.5, -0.6, -0.7, -0.8],
            ],
            vec![0.2, -1.0, 0.1, 0.0],
            0.05,
        );
        let kappa = [0.6, 0.8];
        let w = dynamic_weights(&p, &kappa, KernelSign::Softmin).unwrap();
        let mut expect = vec![0.5, 0.5];
        for t in 1..4 {
            let pi = normalized_kernel(
                p.realized_returns[t - 1],
                &[p.var[0][t - 1], p.var[1][t - 1]],
                &[1.0, 1.0],
                0.05,
                KernelSign::Softmin,
            )
            .unwrap();
            let mut next = vec![
                kappa[0] * expect[0] + (1.0 - kappa[0]) * pi[0],
                kappa[1] * expect[1] + (1.0 - kappa[1]) * pi[1],
            ];
            let tot: f64 = next.iter().sum();
            next[0] /= tot;
            next[1] /= tot;
            expect = next;
            assert!((w.weights[t][0] - expect[0]).abs() < 1e-14, "t={t}");
            assert!((w.weights[t][1] - expect[1]).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn rows_on_simplex_and_bracketing() {
        let realized: Vec<f64> = (0..60).map(|t| (t as f64 * 0.77).sin() * 0.5).collect();
        let p = toy_panel(
            vec![
                realized.iter().map(|r| r - 1.0).collect(),
                realized.iter().map(|r| r - 2.0).collect(),
                (0..60).map(|t| -1.5 - 0.3 * ((t as f64).cos())).collect(),
            ],
            realized,
            0.01,
        );
        let w = dynamic_weights(&p, &[0.3, 0.6, 0.9], KernelSign::Softmin).unwrap();
        for row in &w.weights {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
        let v = combine(&p, &w).unwrap();
        for t in 0..p.horizon() {
            let lo = (0..3).map(|j| p.var[j][t]).fold(f64::INFINITY, f64::min);
            let hi = (0..3).map(|j| p.var[j][t]).fold(f64::NEG_INFINITY, f64::max);
            assert!(v[t] >= lo - 1e-12 && v[t] <= hi + 1e-12, "t={t}");
        }
    }

    #[test]
    fn combine_uniform_equals_average_and_onehot_selects() {
        let p = toy_panel(
            vec![vec![-1.0, -3.0], vec![-2.0, -5.0]],
            vec![0.0, 0.0],
            0.01,
        );
        let uniform = WeightSeries {
            weights: vec![vec![0.5, 0.5]; 2],
            kappa: vec![0.5, 0.5],
        };
        assert_eq!(combine(&p, &uniform).unwrap(), static_average(&p).unwrap());
        let onehot = WeightSeries {
            weights: vec![vec![0.0, 1.0]; 2],
            kappa: vec![0.5, 0.5],
        };
        assert_eq!(combine(&p, &onehot).unwrap(), p.var[1]);
    }

    #[test]
    fn optimize_kappa_flat_for_identical_models() {
        let realized: Vec<f64> = (0..80).map(|t| (t as f64 * 0.3).sin()).collect();
        let col: Vec<f64> = realized.iter().map(|r| r - 1.0).collect();
        let p = toy_panel(vec![col.clone(), col], realized, 0.05);
        let fit = optimize_kappa(&p, KernelSign::Softmin).unwrap();
        // any kappa yields the same combined loss
        let w1 = dynamic_weights(&p, &fit.kappa, KernelSign::Softmin).unwrap();
        let w2 = dynamic_weights(&p, &[0.5, 0.5], KernelSign::Softmin).unwrap();
        let l1 = average_loss(
            &p.realized_returns,
            &combine(&p, &w1).unwrap(),
            p.tau,
        );
        let l2 = average_loss(
            &p.realized_returns,
            &combine(&p, &w2).unwrap(),
            p.tau,
        );
        assert!((l1 - l2).abs() < 1e-14);
    }

    #[test]
    fn optimized_dynamic_not_worse_than_static() {
        // one model dominant at every t: the optimizer should exploit it
        let realized: Vec<f64> = (0..120)
            .map(|t| 0.4 * ((t as f64) * 0.77).sin() - f64::from(t % 17 == 0))
            .collect();
        let good: Vec<f64> = realized
            .iter()
            .enumerate()
            .map(|(t, _)| -1.1 - 0.1 * ((t as f64) * 0.3).cos())
            .collect();
        let bad: Vec<f64> = (0..120).map(|t| -3.0 - ((t % 5) as f64) * 0.2).collect();
        let p = toy_panel(vec![good, bad], realized, 0.05);
        let out = combined_var(&p, KernelSign::Softmin).unwrap();
        let dyn_loss = average_loss(&p.realized_returns, &out.var_dyn, p.tau);
        let avg_loss = average_loss(&p.realized_returns, &out.var_avg, p.tau);
        assert!(
            dyn_loss <= avg_loss + 1e-9,
            "dynamic {dyn_loss} vs static {avg_loss}"
        );
    }

    #[test]
    fn single_model_combination_is_identity() {
        let realized: Vec<f64> = (0..60).map(|t| (t as f64 * 0.5).sin()).collect();
        let col: Vec<f64> = realized.iter().map(|r| r - 1.0).collect();
        let p = toy_panel(vec![col.clone()], realized, 0.05);
        let out = combined_var(&p, KernelSign::Softmin).unwrap();
        for (a, b) in out.var_dyn.iter().zip(&col) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(out.var_avg, col);
    }
}
