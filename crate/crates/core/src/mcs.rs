//! Model Confidence Set under the asymmetric quantile loss: loss matrix,
//! AR-based block-length choice, block bootstrap of the loss differentials,
//! range statistic, sequential elimination with bootstrap p-values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::VaRPanel;

/// Asymmetric tau-quantile (pinball) loss of a VaR forecast:
/// rho_tau(r - var) with rho_tau(z) = z (tau - 1{z < 0}).
pub fn quantile_loss(r: f64, var: f64, tau: f64) -> f64 {
    let z = r - var;
    z * (tau - f64::from(z < 0.0))
}

/// Per-time, per-model quantile losses. The 1/n averaging factor is applied
/// when differentials are averaged, not per element.
#[derive(Debug, Clone)]
pub struct LossMatrix {
    /// `losses[j][t]` for model j at time t.
    pub losses: Vec<Vec<f64>>,
    pub model_ids: Vec<String>,
    pub tau: f64,
}

impl LossMatrix {
    pub fn n_models(&self) -> usize {
        self.losses.len()
    }

    pub fn horizon(&self) -> usize {
        self.losses.first().map_or(0, Vec::len)
    }
}

/// Elementwise quantile loss of every panel column.
pub fn loss_matrix(panel: &VaRPanel) -> LossMatrix {
    let losses = panel
        .var
        .iter()
        .map(|col| {
            panel
                .realized_returns
                .iter()
                .zip(col)
                .map(|(&r, &v)| quantile_loss(r, v, panel.tau))
                .collect()
        })
        .collect();
    LossMatrix {
        losses,
        model_ids: panel.model_ids.clone(),
        tau: panel.tau,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct McsConfig {
    /// Significance level for elimination.
    pub alpha: f64,
    /// Bootstrap replications.
    pub b_replications: usize,
    /// Largest AR order examined for the block length.
    pub max_block_lag: usize,
    pub seed: u64,
}

impl Default for McsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            b_replications: 2000,
            max_block_lag: 10,
            seed: 0,
        }
    }
}

impl McsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0,1) (got {})",
                self.alpha
            )));
        }
        if self.b_replications < 200 {
            return Err(Error::InvalidInput(format!(
                "at least 200 bootstrap replications required (got {})",
                self.b_replications
            )));
        }
        if self.max_block_lag == 0 {
            return Err(Error::InvalidInput("max_block_lag must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EliminationStep {
    pub model_id: String,
    /// Range statistic of the set the model was eliminated from.
    pub t_r: f64,
    /// MCS p-value: running maximum of step p-values up to this elimination.
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McsResult {
    pub surviving_ids: Vec<String>,
    pub elimination_order: Vec<EliminationStep>,
    /// AR-selected block length used for the whole run.
    pub block_length: usize,
    /// p-value at which the procedure stopped (1.0 when elimination ran down
    /// to a single model or the set was degenerate).
    pub final_pvalue: f64,
}

/// Fit an AR(p) by least squares (with intercept) and return the number of
/// lag coefficients whose t-statistic exceeds 1.96 in absolute value.
fn significant_lag_count(series: &[f64], max_lag: usize) -> usize {
    let n = series.len();
    let p = max_lag.min(n.saturating_sub(2) / 2);
    if p == 0 {
        return 0;
    }
    let rows = n - p;
    let ncols = p + 1;
    // X'X and X'y via normal equations
    let design_row = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            series[p + i - j]
        }
    };
    let mut xtx = vec![vec![0.0; ncols]; ncols];
    let mut xty = vec![0.0; ncols];
    for i in 0..rows {
        let y = series[p + i];
        for a in 0..ncols {
            let xa = design_row(i, a);
            xty[a] += xa * y;
            for b in a..ncols {
                xtx[a][b] += xa * design_row(i, b);
            }
        }
    }
    for a in 0..ncols {
        for b in 0..a {
            xtx[a][b] = xtx[b][a];
        }
    }
    let Some(xtx_inv) = invert(&xtx) else {
        return 0;
    };
    let mut beta = vec![0.0; ncols];
    for a in 0..ncols {
        for b in 0..ncols {
            beta[a] += xtx_inv[a][b] * xty[b];
        }
    }
    // residual variance
    let mut rss = 0.0;
    for i in 0..rows {
        let mut fit = 0.0;
        for a in 0..ncols {
            fit += beta[a] * design_row(i, a);
        }
        let e = series[p + i] - fit;
        rss += e * e;
    }
    let dof = rows.saturating_sub(ncols);
    if dof == 0 {
        return 0;
    }
    let s2 = rss / dof as f64;
    let mut count = 0usize;
    for j in 1..=p {
        let se = (s2 * xtx_inv[j][j]).sqrt();
        if se > 0.0 && (beta[j] / se).abs() > 1.96 {
            count += 1;
        }
    }
    count
}

/// Gauss-Jordan inverse with partial pivoting; None when singular.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                a[r1][col]
                    .abs()
                    .partial_cmp(&a[r2][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = a[col][col];
        for j in 0..n {
            a[col][j] /= pivot;
            inv[col][j] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[row][j] -= factor * a[col][j];
                inv[row][j] -= factor * inv[col][j];
            }
        }
    }
    Some(inv)
}

/// Block length for the bootstrap: the maximum, over all pairwise loss
/// differential series, of the number of significant AR parameters in an
/// AR(max_block_lag) fit; floored at 1.
pub fn block_length(losses: &LossMatrix, max_block_lag: usize) -> Result<usize> {
    let m = losses.n_models();
    let n = losses.horizon();
    if m < 2 {
        return Err(Error::InvalidInput(
            "block length needs at least 2 models".into(),
        ));
    }
    if n < 20 {
        return Err(Error::InvalidInput(format!(
            "differential series of length {n} are too short (need >= 20)"
        )));
    }
    let mut k = 1usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let d: Vec<f64> = (0..n)
                .map(|t| losses.losses[i][t] - losses.losses[j][t])
                .collect();
            // constant series carry no AR structure
            if d.iter().all(|&x| (x - d[0]).abs() < 1e-300) {
                continue;
            }
            k = k.max(significant_lag_count(&d, max_block_lag));
        }
    }
    Ok(k.max(1))
}

/// Block-bootstrap index sequences: B replicates of exactly n indices each.
///
/// Per replicate, v = floor(n/k) - 1 block starts are drawn uniformly from
/// 0..n, each start is extended downward k rows advancing by one with
/// wrap-around past n, the k x v matrix is concatenated column-major, and the
/// l = n - k v leftover indices are drawn uniformly.
pub fn bootstrap_indices(n: usize, k: usize, b: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::InvalidInput("block length must be >= 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "series length {n} must exceed block length {k}"
        )));
    }
    let v = n / k - 1;
    let l = n - k * v;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut replicates = Vec::with_capacity(b);
    for _ in 0..b {
        let mut idx = Vec::with_capacity(n);
        for _ in 0..v {
            let start = rng.gen_range(0..n);
            for row in 0..k {
                idx.push((start + row) % n);
            }
        }
        for _ in 0..l {
            idx.push(rng.gen_range(0..n));
        }
        debug_assert_eq!(idx.len(), n);
        replicates.push(idx);
    }
    Ok(replicates)
}

/// Bootstrapped variance of the mean differential:
/// (1/B) sum_b (dbar^b - dbar)^2. Returns the variance and whether the
/// replicate means were all identical (zero-variance flag).
pub fn bootstrap_variance(d: &[f64], indices: &[Vec<usize>]) -> (f64, bool) {
    let n = d.len() as f64;
    let dbar = d.iter().sum::<f64>() / n;
    let mut acc = 0.0;
    for idx in indices {
        let db = idx.iter().map(|&t| d[t]).sum::<f64>() / n;
        acc += (db - dbar) * (db - dbar);
    }
    let var = acc / indices.len() as f64;
    (var, var == 0.0)
}

/// Pairwise statistics over a model subset. A zero bootstrap variance means
/// every resample mean equals the full mean: with a zero mean gap the pair
/// carries no evidence (bit-identical forecasts, excluded from the range);
/// with a nonzero gap the difference is certain and the statistic is
/// infinite, never an indeterminate ratio.
struct PairStats {
    /// (a, b, dbar_ij, sd) for a < b over subset positions, evidential pairs
    /// only; sd == 0 encodes a certain (zero-variance, nonzero-gap) pair.
    pairs: Vec<(usize, usize, f64, f64)>,
}

fn pair_statistic(dbar: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        dbar.abs() / sd
    } else {
        f64::INFINITY
    }
}

fn pair_stats(losses: &LossMatrix, subset: &[usize], indices: &[Vec<usize>]) -> PairStats {
    let n = losses.horizon() as f64;
    let mut pairs = Vec::new();
    for a in 0..subset.len() {
        for b in (a + 1)..subset.len() {
            let (i, j) = (subset[a], subset[b]);
            let d: Vec<f64> = (0..losses.horizon())
                .map(|t| losses.losses[i][t] - losses.losses[j][t])
                .collect();
            let dbar = d.iter().sum::<f64>() / n;
            let (var, flat) = bootstrap_variance(&d, indices);
            if flat && dbar == 0.0 {
                continue;
            }
            pairs.push((a, b, dbar, var.sqrt()));
        }
    }
    PairStats { pairs }
}

/// Range statistic and the maximizing pair (subset positions).
pub fn t_r_statistic(
    losses: &LossMatrix,
    subset: &[usize],
    indices: &[Vec<usize>],
) -> Result<(f64, (usize, usize))> {
    let stats = pair_stats(losses, subset, indices);
    let best = stats
        .pairs
        .iter()
        .map(|&(i, j, dbar, sd)| (pair_statistic(dbar, sd), (i, j)))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    best.ok_or_else(|| {
        Error::Degenerate("no pair with a nonzero loss differential".into())
    })
}

/// The full sequential MCS procedure.
///
/// The block length and one shared set of bootstrap index sequences are
/// computed once on the initial set (common random numbers across pairs and
/// elimination steps). At each step: the range statistic of the current set
/// is compared against its bootstrap distribution; while the equal-predictive
/// -ability hypothesis is rejected at `alpha`, the model maximizing the
/// directed statistic sup_j dbar_ij / sd is removed. Reported p-values carry
/// the running maximum. Sets whose models have bit-identical losses survive
/// with p-value 1.
pub fn mcs_run(losses: &LossMatrix, config: &McsConfig) -> Result<McsResult> {
    config.validate()?;
    let m = losses.n_models();
    let n = losses.horizon();
    if m < 2 {
        return Err(Error::InvalidInput(
            "the MCS needs at least 2 models".into(),
        ));
    }
    if n < 50 {
        return Err(Error::InvalidInput(format!(
            "loss horizon {n} too short for the MCS (need >= 50)"
        )));
    }
    for col in &losses.losses {
        if col.len() != n {
            return Err(Error::InvalidInput("ragged loss matrix".into()));
        }
    }

    let k = block_length(losses, config.max_block_lag)?;
    let indices = bootstrap_indices(n, k, config.b_replications, config.seed)?;

    let mut active: Vec<usize> = (0..m).collect();
    let mut elimination_order = Vec::new();
    let mut running_pmax = 0.0f64;
    let final_pvalue;

    loop {
        if active.len() == 1 {
            final_pvalue = 1.0;
            break;
        }
        let stats = pair_stats(losses, &active, &indices);
        if stats.pairs.is_empty() {
            // every remaining pair has identical losses
            final_pvalue = 1.0;
            break;
        }
        let (t_obs, _) = stats
            .pairs
            .iter()
            .map(|&(i, j, dbar, sd)| (pair_statistic(dbar, sd), (i, j)))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty pairs");

        // bootstrap distribution of the range statistic under the null;
        // certain pairs contribute nothing (their resample means never move)
        let nf = n as f64;
        let mut exceed = 0usize;
        for idx in &indices {
            let mut t_b = 0.0f64;
            for &(a, b, dbar, sd) in &stats.pairs {
                if sd == 0.0 {
                    continue;
                }
                let (i, j) = (active[a], active[b]);
                let mut db = 0.0;
                for &t in idx {
                    db += losses.losses[i][t] - losses.losses[j][t];
                }
                db /= nf;
                let stat = (db - dbar).abs() / sd;
                if stat > t_b {
                    t_b = stat;
                }
            }
            if t_b > t_obs {
                exceed += 1;
            }
        }
        let p_step = exceed as f64 / config.b_replications as f64;
        running_pmax = running_pmax.max(p_step);

        if p_step >= config.alpha {
            final_pvalue = running_pmax;
            break;
        }

        // elimination rule: argmax_i sup_j dbar_ij / sd over the directed pairs
        let mut sup_dir = vec![f64::NEG_INFINITY; active.len()];
        for &(a, b, dbar, sd) in &stats.pairs {
            let directed = if sd > 0.0 {
                dbar / sd
            } else if dbar > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            sup_dir[a] = sup_dir[a].max(directed);
            sup_dir[b] = sup_dir[b].max(-directed);
        }
        let (worst_pos, _) = sup_dir
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty set");
        elimination_order.push(EliminationStep {
            model_id: losses.model_ids[active[worst_pos]].clone(),
            t_r: t_obs,
            p_value: running_pmax,
        });
        active.remove(worst_pos);
    }

    Ok(McsResult {
        surviving_ids: active
            .iter()
            .map(|&i| losses.model_ids[i].clone())
            .collect(),
        elimination_order,
        block_length: k,
        final_pvalue,
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quantile_loss_non_negative_and_asymmetric(
            r in -10.0f64..10.0,
            var in -10.0f64..10.0,
            tau in 0.0005f64..0.4999,
        ) {
            let loss = quantile_loss(r, var, tau);
            prop_assert!(loss >= 0.0);
            // violations weigh (1 - tau) per unit depth, excesses weigh tau
            let z = r - var;
            let expected = if z < 0.0 { -z * (1.0 - tau) } else { z * tau };
            prop_assert!((loss - expected).abs() < 1e-12);
        }

        #[test]
        fn bootstrap_replicates_structural(
            n in 10usize..200,
            k in 1usize..9,
            seed in 0u64..500,
        ) {
            prop_assume!(n > k);
            let reps = bootstrap_indices(n, k, 5, seed).unwrap();
            for idx in &reps {
                prop_assert_eq!(idx.len(), n);
                prop_assert!(idx.iter().all(|&i| i < n));
            }
        }
    }
}
