//! VaR violation diagnostics: A/E ratio, absolute deviations, Kupiec
//! unconditional coverage, Christoffersen conditional coverage, and the
//! Engle-Manganelli dynamic quantile test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::chi2_survival;

/// Violation indicator series: hit\[t\] = 1 iff the realized return fell
/// strictly below the forecasted VaR.
#[derive(Debug, Clone)]
pub struct HitSeries {
    pub hits: Vec<u8>,
    pub tau: f64,
}

impl HitSeries {
    pub fn n(&self) -> usize {
        self.hits.len()
    }

    pub fn n_hits(&self) -> usize {
        self.hits.iter().map(|&h| h as usize).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub ae_ratio: f64,
    pub ad_mean: f64,
    pub ad_max: f64,
    pub uc_stat: f64,
    pub uc_pvalue: f64,
    pub cc_stat: f64,
    pub cc_pvalue: f64,
    pub dq_stat: f64,
    pub dq_pvalue: f64,
}

/// Violation indicators (strict inequality: return < VaR).
pub fn hits(realized: &[f64], var_column: &[f64], tau: f64) -> Result<HitSeries> {
    if realized.len() != var_column.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} returns vs {} VaR forecasts",
            realized.len(),
            var_column.len()
        )));
    }
    Ok(HitSeries {
        hits: realized
            .iter()
            .zip(var_column)
            .map(|(&r, &v)| u8::from(r < v))
            .collect(),
        tau,
    })
}

/// Actual over expected exceedance ratio: (number of hits) / (n tau).
pub fn ae_ratio(h: &HitSeries) -> f64 {
    h.n_hits() as f64 / (h.n() as f64 * h.tau)
}

/// Mean and maximum absolute deviation |return - VaR| over violating
/// observations; (0, 0) when there are no violations.
pub fn ad_stats(realized: &[f64], var_column: &[f64], h: &HitSeries) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut count = 0usize;
    for t in 0..h.n() {
        if h.hits[t] == 1 {
            let ad = (realized[t] - var_column[t]).abs();
            sum += ad;
            max = max.max(ad);
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (sum / count as f64, max)
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Kupiec unconditional coverage likelihood ratio and its chi-square(1)
/// p-value. Degenerate hit frequencies use the 0 ln 0 = 0 convention.
pub fn kupiec_uc(h: &HitSeries) -> Result<(f64, f64)> {
    let n = h.n();
    if n == 0 {
        return Err(Error::InvalidInput("empty hit series".into()));
    }
    let n1 = h.n_hits() as f64;
    let n0 = n as f64 - n1;
    let tau = h.tau;
    let pi_hat = n1 / n as f64;
    let lr = -2.0
        * (xlogy(n0, 1.0 - tau) + xlogy(n1, tau) - xlogy(n0, 1.0 - pi_hat) - xlogy(n1, pi_hat));
    let lr = lr.max(0.0);
    Ok((lr, chi2_survival(lr, 1.0)?))
}

/// First-order Markov transition counts of a binary sequence.
fn transition_counts(hits: &[u8]) -> (f64, f64, f64, f64) {
    let mut n00 = 0.0;
    let mut n01 = 0.0;
    let mut n10 = 0.0;
    let mut n11 = 0.0;
    for w in hits.windows(2) {
        match (w[0], w[1]) {
            (0, 0) => n00 += 1.0,
            (0, 1) => n01 += 1.0,
            (1, 0) => n10 += 1.0,
            _ => n11 += 1.0,
        }
    }
    (n00, n01, n10, n11)
}

/// Christoffersen conditional coverage: LR_cc = LR_uc + LR_ind with the
/// independence part from first-order Markov transition counts; chi-square(2)
/// p-value. Degenerate rows use the 0 ln 0 = 0 convention.
pub fn christoffersen_cc(h: &HitSeries) -> Result<(f64, f64)> {
    if h.n() < 2 {
        return Err(Error::InvalidInput(
            "conditional coverage needs at least 2 observations".into(),
        ));
    }
    let (uc, _) = kupiec_uc(h)?;
    let (n00, n01, n10, n11) = transition_counts(&h.hits);
    let pi01 = if n00 + n01 > 0.0 { n01 / (n00 + n01) } else { 0.0 };
    let pi11 = if n10 + n11 > 0.0 { n11 / (n10 + n11) } else { 0.0 };
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let l_markov =
        xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    let l_indep = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    let lr_ind = (-2.0 * (l_indep - l_markov)).max(0.0);
    let cc = uc + lr_ind;
    Ok((cc, chi2_survival(cc, 2.0)?))
}

/// Engle-Manganelli dynamic quantile test. Regresses hit_t - tau on an
/// intercept, `lags` lags of (hit - tau), and the contemporaneous VaR
/// forecast; DQ = b'(X'X)b / (tau (1 - tau)) with the least-squares
/// projection, chi-square(lags + 2) p-value.
///
/// The projection is computed with rank-revealing orthogonalization, so exact
/// collinearity (e.g. an all-zero hit sequence against a constant VaR) still
/// yields the well-defined statistic ||X b||^2 is invariant to the choice of
/// solution. A design matrix with no usable column is reported as singular.
pub fn engle_manganelli_dq(
    h: &HitSeries,
    var_column: &[f64],
    lags: usize,
) -> Result<(f64, f64)> {
    let n = h.n();
    if var_column.len() != n {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {n} hits vs {} VaR forecasts",
            var_column.len()
        )));
    }
    if n <= lags + 2 {
        return Err(Error::InvalidInput(format!(
            "dynamic quantile test needs n > lags + 2 (n = {n}, lags = {lags})"
        )));
    }
    let tau = h.tau;
    let rows = n - lags;
    let ncols = lags + 2;
    // design matrix, column-major
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(ncols);
    cols.push(vec![1.0; rows]);
    for lag in 1..=lags {
        cols.push(
            (0..rows)
                .map(|i| f64::from(h.hits[lags + i - lag]) - tau)
                .collect(),
        );
    }
    cols.push(var_column[lags..].to_vec());
    let y: Vec<f64> = (0..rows)
        .map(|i| f64::from(h.hits[lags + i]) - tau)
        .collect();

    // modified Gram-Schmidt with column dropping; projection of y onto the
    // span of the design matrix
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for col in &cols {
        let mut v = col.clone();
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let col_norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 * col_norm.max(1.0) {
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    if basis.is_empty() {
        return Err(Error::Singular("dynamic quantile design matrix".into()));
    }
    let mut y_hat = vec![0.0; rows];
    for q in &basis {
        let dot: f64 = y.iter().zip(q).map(|(a, b)| a * b).sum();
        for (yi, qi) in y_hat.iter_mut().zip(q) {
            *yi += dot * qi;
        }
    }
    let stat = y_hat.iter().map(|v| v * v).sum::<f64>() / (tau * (1.0 - tau));
    let df = (lags + 2) as f64;
    Ok((stat, chi2_survival(stat, df)?))
}

/// Full diagnostic battery for one model column.
pub fn backtest_report(
    realized: &[f64],
    var_column: &[f64],
    tau: f64,
    dq_lags: usize,
) -> Result<BacktestReport> {
    let h = hits(realized, var_column, tau)?;
    let (ad_mean, ad_max) = ad_stats(realized, var_column, &h);
    let (uc_stat, uc_pvalue) = kupiec_uc(&h)?;
    let (cc_stat, cc_pvalue) = christoffersen_cc(&h)?;
    let (dq_stat, dq_pvalue) = engle_manganelli_dq(&h, var_column, dq_lags)?;
    Ok(BacktestReport {
        ae_ratio: ae_ratio(&h),
        ad_mean,
        ad_max,
        uc_stat,
        uc_pvalue,
        cc_stat,
        cc_pvalue,
        dq_stat,
        dq_pvalue,
    })
}
