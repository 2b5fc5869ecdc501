//! Tick ingestion, bar resampling, sector aggregation, summary statistics.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw tick data for one instrument. Timestamps are integer epoch seconds,
/// strictly increasing; prices are positive.
#[derive(Debug, Clone)]
pub struct TickSeries {
    pub instrument_id: String,
    pub timestamps: Vec<i64>,
    pub prices: Vec<f64>,
    pub volumes: Vec<f64>,
}

impl TickSeries {
    pub fn new(
        instrument_id: impl Into<String>,
        timestamps: Vec<i64>,
        prices: Vec<f64>,
        volumes: Vec<f64>,
    ) -> Result<Self> {
        if timestamps.len() != prices.len() || prices.len() != volumes.len() {
            return Err(Error::InvalidInput(format!(
                "tick sequence lengths differ: {} timestamps, {} prices, {} volumes",
                timestamps.len(),
                prices.len(),
                volumes.len()
            )));
        }
        for w in timestamps.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(format!(
                    "timestamps not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        for (i, &p) in prices.iter().enumerate() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-positive price {p} at row {i}"
                )));
            }
        }
        for (i, &v) in volumes.iter().enumerate() {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "negative volume {v} at row {i}"
                )));
            }
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            timestamps,
            prices,
            volumes,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Fixed-interval bars. The series holds `n` bars: `timestamps` and `volumes`
/// have `n` entries, `log_returns` has `n - 1` (the first bar is the base of
/// the first return). `log_returns[i]` is the return closing at
/// `timestamps[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    /// Bar-close epoch times.
    pub timestamps: Vec<i64>,
    pub log_returns: Vec<f64>,
    /// Tick volume summed over each bar window.
    pub volumes: Vec<f64>,
    pub interval_seconds: u32,
}

impl BarSeries {
    pub fn n_bars(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_returns(&self) -> usize {
        self.log_returns.len()
    }

    /// Close times of the bars carrying a return (all but the first).
    pub fn return_timestamps(&self) -> &[i64] {
        &self.timestamps[1..]
    }

    /// Volume of the bar preceding each return bar, aligned one-to-one with
    /// `log_returns` (the LAGVOL covariate).
    pub fn lagged_volumes(&self) -> &[f64] {
        &self.volumes[..self.volumes.len() - 1]
    }

    fn check(&self) -> Result<()> {
        if self.timestamps.len() < 2
            || self.log_returns.len() + 1 != self.timestamps.len()
            || self.volumes.len() != self.timestamps.len()
        {
            return Err(Error::InvalidInput(format!(
                "inconsistent bar series: {} timestamps, {} returns, {} volumes",
                self.timestamps.len(),
                self.log_returns.len(),
                self.volumes.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    /// Non-excess kurtosis: 3 for a Gaussian.
    pub kurtosis: f64,
    pub quantile_1pct: f64,
    pub jarque_bera: f64,
}

/// Load one instrument's ticks from a CSV with header `timestamp,price,volume`.
/// Timestamps may be epoch seconds or ISO-8601 (`YYYY-MM-DDTHH:MM:SS`,
/// optionally with a space separator or trailing `Z`). Duplicate timestamps
/// are rejected.
pub fn load_ticks(path: impl AsRef<Path>) -> Result<TickSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let instrument_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".into());
    load_ticks_from(file, &path.display().to_string(), instrument_id)
}

/// Same as [`load_ticks`] but reading from any source (used by tests and the
/// CLI for in-memory data).
pub fn load_ticks_from<R: Read>(
    reader: R,
    source_name: &str,
    instrument_id: impl Into<String>,
) -> Result<TickSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| parse_err(source_name, 1, &e.to_string()))?
        .clone();
    let expected = ["timestamp", "price", "volume"];
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(parse_err(
            source_name,
            1,
            &format!(
                "expected header `timestamp,price,volume`, got `{}`",
                got.join(",")
            ),
        ));
    }

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    let mut volumes = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| parse_err(source_name, line, &e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(
                source_name,
                line,
                &format!("expected 3 fields, got {}", record.len()),
            ));
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| {
            parse_err(source_name, line, &format!("bad timestamp `{}`", &record[0]))
        })?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(source_name, line, &format!("bad price `{}`", &record[1])))?;
        let volume: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(source_name, line, &format!("bad volume `{}`", &record[2])))?;
        if let Some(&last) = timestamps.last() {
            if ts == last {
                return Err(parse_err(
                    source_name,
                    line,
                    &format!("duplicate timestamp {ts}"),
                ));
            }
            if ts < last {
                return Err(parse_err(
                    source_name,
                    line,
                    &format!("non-monotone timestamp {ts} after {last}"),
                ));
            }
        }
        if !(price > 0.0) {
            return Err(parse_err(
                source_name,
                line,
                &format!("non-positive price {price}"),
            ));
        }
        if volume < 0.0 {
            return Err(parse_err(
                source_name,
                line,
                &format!("negative volume {volume}"),
            ));
        }
        timestamps.push(ts);
        prices.push(price);
        volumes.push(volume);
    }
    TickSeries::new(instrument_id, timestamps, prices, volumes)
}

fn parse_err(path: &str, line: usize, message: &str) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.to_string(),
    }
}

/// Epoch seconds, or ISO-8601 UTC without fractional seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    let bytes = s.as_bytes();
    if bytes.len() != 19 {
        return None;
    }
    let sep = bytes[10];
    if sep != b'T' && sep != b' ' {
        return None;
    }
    let num = |range: std::ops::Range<usize>| -> Option<i64> { s.get(range)?.parse().ok() };
    let year = num(0..4)?;
    let month = num(5..7)?;
    let day = num(8..10)?;
    let hour = num(11..13)?;
    let minute = num(14..16)?;
    let second = num(17..19)?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return None;
    }
    if hour > 23 || minute > 59 || second > 60 {
        return None;
    }
    Some(days_from_civil(year, month, day) * 86_400 + hour * 3_600 + minute * 60 + second)
}

/// Days since the Unix epoch for a proleptic Gregorian date.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Resample ticks into fixed bars. Bar boundaries sit at integer multiples of
/// the interval; the bar closing at boundary `b` covers ticks in
/// `(b - interval, b]`, takes the last tick price in the window as its close,
/// and sums the tick volumes. Boundaries with no ticks are skipped (session
/// breaks) and log-returns run across breaks as-is.
pub fn resample(ticks: &TickSeries, interval_seconds: u32) -> Result<BarSeries> {
    if interval_seconds == 0 {
        return Err(Error::InvalidInput("interval must be positive".into()));
    }
    if ticks.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 ticks to resample".into(),
        ));
    }
    let spacing = ticks
        .timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .expect("len >= 2");
    if i64::from(interval_seconds) % spacing != 0 {
        return Err(Error::InvalidInput(format!(
            "interval {interval_seconds}s is not a multiple of the source spacing {spacing}s"
        )));
    }
    let interval = i64::from(interval_seconds);

    // (boundary, close, volume) per non-empty bar window
    let mut bars: Vec<(i64, f64, f64)> = Vec::new();
    for i in 0..ticks.len() {
        let ts = ticks.timestamps[i];
        let boundary = ts.div_euclid(interval) * interval
            + if ts.rem_euclid(interval) == 0 { 0 } else { interval };
        match bars.last_mut() {
            Some((b, close, vol)) if *b == boundary => {
                *close = ticks.prices[i];
                *vol += ticks.volumes[i];
            }
            _ => bars.push((boundary, ticks.prices[i], ticks.volumes[i])),
        }
    }
    if bars.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "resampling produced {} bar(s); need at least 2",
            bars.len()
        )));
    }

    let timestamps: Vec<i64> = bars.iter().map(|b| b.0).collect();
    let volumes: Vec<f64> = bars.iter().map(|b| b.2).collect();
    let log_returns: Vec<f64> = bars
        .windows(2)
        .map(|w| w[1].1.ln() - w[0].1.ln())
        .collect();
    Ok(BarSeries {
        timestamps,
        log_returns,
        volumes,
        interval_seconds,
    })
}

/// Cross-sectionally aggregate member bars into a sector: mean of log-returns,
/// sum of volumes. All members must share the exact timestamp grid.
pub fn aggregate_sector(members: &[BarSeries]) -> Result<BarSeries> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidInput("empty member list".into()))?;
    first.check()?;
    for (i, m) in members.iter().enumerate().skip(1) {
        m.check()?;
        if m.timestamps != first.timestamps {
            return Err(Error::InvalidInput(format!(
                "member {i} timestamp grid differs from member 0"
            )));
        }
        if m.interval_seconds != first.interval_seconds {
            return Err(Error::InvalidInput(format!(
                "member {i} interval {} differs from member 0 interval {}",
                m.interval_seconds, first.interval_seconds
            )));
        }
    }
    let m = members.len() as f64;
    let mut log_returns = vec![0.0; first.n_returns()];
    let mut volumes = vec![0.0; first.n_bars()];
    for member in members {
        for (acc, r) in log_returns.iter_mut().zip(&member.log_returns) {
            *acc += r;
        }
        for (acc, v) in volumes.iter_mut().zip(&member.volumes) {
            *acc += v;
        }
    }
    for r in &mut log_returns {
        *r /= m;
    }
    Ok(BarSeries {
        timestamps: first.timestamps.clone(),
        log_returns,
        volumes,
        interval_seconds: first.interval_seconds,
    })
}

/// Moment-based summary statistics. Skewness and kurtosis use the 1/n central
/// moment estimators feeding the Jarque-Bera statistic
/// JB = n/6 (S^2 + (K-3)^2 / 4); kurtosis is non-excess.
pub fn summary_stats(returns: &[f64]) -> Result<SummaryStats> {
    let n = returns.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "summary statistics need at least 4 observations (got {n})"
        )));
    }
    let nf = n as f64;
    let mean = returns.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &r in returns {
        let d = r - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 || m2 < mean * mean * 1e-26 {
        return Err(Error::Degenerate(
            "zero variance: skewness and kurtosis undefined".into(),
        ));
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let jarque_bera = nf / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite returns"));
    Ok(SummaryStats {
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        std_dev: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness,
        kurtosis,
        quantile_1pct: empirical_quantile_sorted(&sorted, 0.01),
        jarque_bera,
    })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn empirical_quantile(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("quantile of empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!(
            "quantile level {p} outside [0,1]"
        )));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(empirical_quantile_sorted(&sorted, p))
}

fn empirical_quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    /// Geometric-mean aggregation of tick prices on a shared grid, the
    /// tick-level counterpart of averaging log-returns.
    fn aggregate_ticks(members: &[TickSeries]) -> TickSeries {
        let n = members[0].len();
        let m = members.len() as f64;
        let mut prices = vec![0.0; n];
        let mut volumes = vec![0.0; n];
        for member in members {
            for t in 0..n {
                prices[t] += member.prices[t].ln();
                volumes[t] += member.volumes[t];
            }
        }
        let prices = prices.iter().map(|lp| (lp / m).exp()).collect();
        TickSeries::new("sector", members[0].timestamps.clone(), prices, volumes).unwrap()
    }

    fn tick_member(seed: Vec<(f64, f64)>) -> TickSeries {
        let timestamps: Vec<i64> = (0..seed.len() as i64).map(|i| 60 * (i + 1)).collect();
        let prices = seed.iter().map(|(p, _)| 50.0 + p.abs()).collect();
        let volumes = seed.iter().map(|(_, v)| v.abs()).collect();
        TickSeries::new("m", timestamps, prices, volumes).unwrap()
    }

    proptest! {
        #[test]
        fn resample_commutes_with_aggregation(
            raw_a in proptest::collection::vec((0.1f64..100.0, 0.0f64..10.0), 8..40),
            raw_b in proptest::collection::vec((0.1f64..100.0, 0.0f64..10.0), 8..40),
        ) {
            let n = raw_a.len().min(raw_b.len());
            let a = tick_member(raw_a[..n].to_vec());
            let b = tick_member(raw_b[..n].to_vec());

            let resampled_then_aggregated = aggregate_sector(&[
                resample(&a, 120).unwrap(),
                resample(&b, 120).unwrap(),
            ])
            .unwrap();
            let aggregated_then_resampled =
                resample(&aggregate_ticks(&[a, b]), 120).unwrap();

            prop_assert_eq!(
                &resampled_then_aggregated.timestamps,
                &aggregated_then_resampled.timestamps
            );
            for (x, y) in resampled_then_aggregated
                .log_returns
                .iter()
                .zip(&aggregated_then_resampled.log_returns)
            {
                prop_assert!((x - y).abs() < 1e-12, "{} vs {}", x, y);
            }
            for (x, y) in resampled_then_aggregated
                .volumes
                .iter()
                .zip(&aggregated_then_resampled.volumes)
            {
                prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
            }
        }

        #[test]
        fn empirical_quantile_within_range(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..200),
            p in 0.0f64..=1.0,
        ) {
            let q = empirical_quantile(&xs, p).unwrap();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(q >= lo && q <= hi);
        }
    }

    #[test]
    fn gaussian_skewness_shrinks_at_scale() {
        let draws = crate::dist::ErrorLaw::Gaussian.sample(4242, 100_000).unwrap();
        let stats = summary_stats(&draws).unwrap();
        assert!(stats.skewness.abs() < 0.05, "skewness {}", stats.skewness);
        assert!((stats.kurtosis - 3.0).abs() < 0.2, "kurtosis {}", stats.kurtosis);
    }

    #[test]
    fn paper_scale_ingestion_row_count() {
        // 87120-row one-minute file loads to a series of the same length
        let mut csv = String::from("timestamp,price,volume\n");
        let mut price = 100.0f64;
        for i in 0..87_120u32 {
            price += if i % 7 == 0 { 0.01 } else { -0.001 };
            csv.push_str(&format!("{},{:.4},{}\n", 60 * (i64::from(i) + 1), price, i % 50));
        }
        let ticks = load_ticks_from(csv.as_bytes(), "mem", "big").unwrap();
        assert_eq!(ticks.len(), 87_120);
    }
}
