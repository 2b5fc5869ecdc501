//! Deterministic CSV/JSON emission for every pipeline artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use varcast_core::backtest::BacktestReport;
use varcast_core::error::{Error, Result};
use varcast_core::estimate::FittedModel;
use varcast_core::forecast::VaRPanel;
use varcast_core::market::{BarSeries, SummaryStats};
use varcast_core::mcs::McsResult;
use varcast_core::model::RegressorKind;
use varcast_core::sentiment::RegressorSeries;

use crate::manifest::RunManifest;

/// Shortest round-trip float formatting; deterministic for a given binary.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// RFC-4180 quoting when the field needs it.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_file(
    manifest: &mut RunManifest,
    out_dir: &Path,
    rel: impl AsRef<Path>,
    contents: &str,
) -> Result<PathBuf> {
    let path = out_dir.join(rel.as_ref());
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, contents)?;
    manifest.record_file(out_dir, &path);
    Ok(path)
}

pub fn json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::InvalidInput(format!("serialization: {e}")))
}

/// Bar CSV: one row per return bar.
pub fn bars_csv(bars: &BarSeries) -> String {
    let mut s = String::from("timestamp,log_return,volume\n");
    for i in 0..bars.n_returns() {
        let _ = writeln!(
            s,
            "{},{},{}",
            bars.return_timestamps()[i],
            fmt_f64(bars.log_returns[i]),
            fmt_f64(bars.volumes[i + 1])
        );
    }
    s
}

/// Summary-statistics table, one row per sector.
pub fn summary_csv(rows: &[(String, SummaryStats)]) -> String {
    let mut s = String::from(
        "sector,min,max,mean,std_dev,skewness,kurtosis,quantile_1pct,jarque_bera\n",
    );
    for (name, st) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(name),
            fmt_f64(st.min),
            fmt_f64(st.max),
            fmt_f64(st.mean),
            fmt_f64(st.std_dev),
            fmt_f64(st.skewness),
            fmt_f64(st.kurtosis),
            fmt_f64(st.quantile_1pct),
            fmt_f64(st.jarque_bera)
        );
    }
    s
}

pub fn regressors_csv(series: &RegressorSeries) -> String {
    let mut s = String::from("timestamp,pos,neg,high,numb,lagvol\n");
    for i in 0..series.timestamps.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            series.timestamps[i],
            series.pos[i],
            series.neg[i],
            series.high[i],
            series.numb[i],
            fmt_f64(series.lagvol[i])
        );
    }
    s
}

pub fn fits_csv(fits: &[FittedModel]) -> String {
    let mut s = String::from(
        "model_id,loglik,aic,bic,converged,n_obs,mu,phi,omega,alpha,beta,gamma,nu,delta\n",
    );
    for f in fits {
        let delta = f
            .params
            .delta
            .iter()
            .map(|d| fmt_f64(*d))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f.spec.id(),
            fmt_f64(f.loglik),
            fmt_f64(f.aic),
            fmt_f64(f.bic),
            f.converged,
            f.n_obs,
            fmt_f64(f.params.mu),
            fmt_f64(f.params.phi),
            fmt_f64(f.params.omega),
            fmt_f64(f.params.alpha),
            fmt_f64(f.params.beta),
            fmt_f64(f.params.gamma),
            f.params.nu.map_or(String::new(), fmt_f64),
            delta
        );
    }
    s
}

/// Panel export: `timestamp,realized,<model_id>...`.
pub fn panel_csv(panel: &VaRPanel) -> String {
    let mut s = String::from("timestamp,realized");
    for id in &panel.model_ids {
        s.push(',');
        s.push_str(&csv_field(id));
    }
    s.push('\n');
    for t in 0..panel.horizon() {
        let _ = write!(
            s,
            "{},{}",
            panel.timestamps[t],
            fmt_f64(panel.realized_returns[t])
        );
        for col in &panel.var {
            let _ = write!(s, ",{}", fmt_f64(col[t]));
        }
        s.push('\n');
    }
    s
}

/// Predicted-variance companion of the panel export.
pub fn panel_sigma2_csv(panel: &VaRPanel) -> String {
    let mut s = String::from("timestamp");
    for id in &panel.model_ids {
        s.push(',');
        s.push_str(&csv_field(id));
    }
    s.push('\n');
    for t in 0..panel.horizon() {
        let _ = write!(s, "{}", panel.timestamps[t]);
        for col in &panel.sigma2_hat {
            let _ = write!(s, ",{}", fmt_f64(col[t]));
        }
        s.push('\n');
    }
    s
}

pub fn backtests_csv(rows: &[(String, BacktestReport)]) -> String {
    let mut s = String::from(
        "model_id,ae_ratio,ad_mean,ad_max,uc_stat,uc_pvalue,cc_stat,cc_pvalue,dq_stat,dq_pvalue\n",
    );
    for (id, r) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(id),
            fmt_f64(r.ae_ratio),
            fmt_f64(r.ad_mean),
            fmt_f64(r.ad_max),
            fmt_f64(r.uc_stat),
            fmt_f64(r.uc_pvalue),
            fmt_f64(r.cc_stat),
            fmt_f64(r.cc_pvalue),
            fmt_f64(r.dq_stat),
            fmt_f64(r.dq_pvalue)
        );
    }
    s
}

/// Per-model survival and elimination summary.
pub fn mcs_csv(result: &McsResult, all_ids: &[String]) -> String {
    let mut s = String::from("model_id,survived,elimination_step,p_value\n");
    for id in all_ids {
        if result.surviving_ids.contains(id) {
            let _ = writeln!(s, "{},true,,{}", csv_field(id), fmt_f64(result.final_pvalue));
        } else {
            let (step, p) = result
                .elimination_order
                .iter()
                .enumerate()
                .find(|(_, e)| &e.model_id == id)
                .map(|(i, e)| (i + 1, e.p_value))
                .unwrap_or((0, f64::NAN));
            let _ = writeln!(s, "{},false,{},{}", csv_field(id), step, fmt_f64(p));
        }
    }
    s
}

/// Composition of the surviving set by regressor kind (count and percent).
pub fn mcs_composition_csv(surviving_ids: &[String]) -> String {
    let mut counts = [0usize; 3];
    for id in surviving_ids {
        // model ids end in the regressor label: _n, _iv, _se
        if id.ends_with("_iv") {
            counts[1] += 1;
        } else if id.ends_with("_se") {
            counts[2] += 1;
        } else {
            counts[0] += 1;
        }
    }
    let total = surviving_ids.len().max(1);
    let mut s = String::from("regressor_set,count,percent\n");
    for (kind, count) in [
        (RegressorKind::None, counts[0]),
        (RegressorKind::InfoVolume, counts[1]),
        (RegressorKind::Sentiment, counts[2]),
    ] {
        let _ = writeln!(
            s,
            "{},{},{}",
            kind.label(),
            count,
            fmt_f64(100.0 * count as f64 / total as f64)
        );
    }
    s
}

/// Combined-forecast export: `timestamp,realized,var_avg,var_dyn`.
pub fn combined_csv(
    timestamps: &[i64],
    realized: &[f64],
    var_avg: &[f64],
    var_dyn: &[f64],
) -> String {
    let mut s = String::from("timestamp,realized,var_avg,var_dyn\n");
    for t in 0..timestamps.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            timestamps[t],
            fmt_f64(realized[t]),
            fmt_f64(var_avg[t]),
            fmt_f64(var_dyn[t])
        );
    }
    s
}

/// AD comparison of the two combination methods (mean and max of the
/// violating deviations, plus the A/E ratio).
pub fn combined_ad_csv(rows: &[(String, f64, f64, f64)]) -> String {
    let mut s = String::from("method,ae_ratio,ad_mean,ad_max\n");
    for (method, ae, ad_mean, ad_max) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            method,
            fmt_f64(*ae),
            fmt_f64(*ad_mean),
            fmt_f64(*ad_max)
        );
    }
    s
}

/// File-name-safe rendering of a quantile level (0.01 -> "0.01").
pub fn tau_label(tau: f64) -> String {
    fmt_f64(tau)
}
