//! Synthetic market fixture for pipeline tests: per-instrument tick CSVs
//! with regime-switching volatility, a sector map, and headlines whose
//! wording is conditioned on the local market move.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub root: PathBuf,
    pub config_path: PathBuf,
}

const POSITIVE_WORDS: [&str; 4] = ["surge", "rally", "upbeat", "beat"];
const NEGATIVE_WORDS: [&str; 4] = ["plunge", "slump", "miss", "panic"];
const HIGH_WORDS: [&str; 3] = ["volatile", "spike", "turmoil"];
const FILLER_WORDS: [&str; 6] = ["market", "shares", "report", "quarter", "outlook", "trading"];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two uniforms
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One instrument's 1-minute prices and volumes over `n_minutes`, with a
/// mild GARCH-style volatility regime so the fitted models have structure.
fn tick_csv(seed: u64, n_minutes: usize, start_ts: i64) -> (String, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("timestamp,price,volume\n");
    let mut log_price = (100.0 + (seed % 40) as f64).ln();
    let mut sigma2: f64 = 1e-6;
    let (omega, alpha, beta) = (1e-7, 0.08, 0.88);
    let mut returns = Vec::with_capacity(n_minutes);
    let mut eps_prev = 0.0;
    for i in 0..n_minutes {
        sigma2 = omega + alpha * eps_prev * eps_prev + beta * sigma2;
        let eps = sigma2.sqrt() * normal(&mut rng);
        log_price += eps;
        eps_prev = eps;
        returns.push(eps);
        let volume = (200.0 * (1.0 + 0.5 * normal(&mut rng).abs())).round();
        let _ = writeln!(
            out,
            "{},{:.6},{}",
            start_ts + (i as i64) * 60,
            log_price.exp(),
            volume
        );
    }
    (out, returns)
}

/// Headlines for one sector, conditioned on the grid-aligned two-minute
/// returns of its first instrument: tail moves carry sentiment words, big
/// squared moves carry volatility words, the middle is filler. Stamps sit
/// inside the matching two-minute window so the labeller sees the signal.
fn headlines_for(
    rng: &mut ChaCha8Rng,
    sector: &str,
    minute_returns: &[f64],
    start_ts: i64,
    out: &mut String,
) {
    // ticks sit at start + 60 i; the bar closing at start + 120 (k+1) spans
    // the minute returns at ticks 2k+1 and 2k+2
    let n_bars = (minute_returns.len().saturating_sub(1)) / 2;
    let bar_returns: Vec<f64> = (0..n_bars)
        .map(|k| minute_returns[2 * k + 1] + minute_returns[2 * k + 2])
        .collect();
    let mut sorted = bar_returns.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_lo = sorted[(sorted.len() as f64 * 0.025) as usize];
    let q_hi = sorted[(sorted.len() as f64 * 0.975) as usize];
    let big = sorted[(sorted.len() as f64 * 0.99) as usize].abs();

    for (k, &r) in bar_returns.iter().enumerate() {
        let mut words: Vec<&str> = Vec::new();
        if r <= q_lo {
            words.push(NEGATIVE_WORDS[rng.gen_range(0..NEGATIVE_WORDS.len())]);
            words.push(NEGATIVE_WORDS[rng.gen_range(0..NEGATIVE_WORDS.len())]);
        } else if r >= q_hi {
            words.push(POSITIVE_WORDS[rng.gen_range(0..POSITIVE_WORDS.len())]);
            words.push(POSITIVE_WORDS[rng.gen_range(0..POSITIVE_WORDS.len())]);
        } else if rng.gen::<f64>() > 0.25 {
            continue; // most quiet bars carry no news
        }
        if r.abs() >= big {
            words.push(HIGH_WORDS[rng.gen_range(0..HIGH_WORDS.len())]);
        }
        for _ in 0..rng.gen_range(1..4) {
            words.push(FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())]);
        }
        let close = start_ts + 120 * (k as i64 + 1);
        let ts = close - rng.gen_range(0..120);
        let _ = writeln!(out, "{},{},\"{} {}\"", ts, sector, sector, words.join(" "));
    }
}

/// Build a fixture with the given sectors (name, instrument count).
pub fn build_fixture(
    dir: &Path,
    sectors: &[(&str, usize)],
    n_minutes: usize,
    seed: u64,
    config_extra: &str,
) -> Fixture {
    let root = dir.to_path_buf();
    let ticks_dir = root.join("ticks");
    std::fs::create_dir_all(&ticks_dir).unwrap();
    let start_ts = 1_345_194_000; // a weekday 09:00:00 UTC
    let mut sector_map = String::from("instrument_id,sector\n");
    let mut headlines = String::from("timestamp,id,text\n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instrument = 0usize;
    for (sector, count) in sectors {
        let mut member_returns: Vec<Vec<f64>> = Vec::new();
        for _ in 0..*count {
            let id = format!("inst{instrument:02}");
            instrument += 1;
            let (csv, returns) = tick_csv(seed + instrument as u64, n_minutes, start_ts);
            std::fs::write(ticks_dir.join(format!("{id}.csv")), csv).unwrap();
            let _ = writeln!(sector_map, "{id},{sector}");
            member_returns.push(returns);
        }
        // headlines condition on the sector-aggregated minute returns, the
        // same quantity the labelling stage sees
        let mean_returns: Vec<f64> = (0..n_minutes)
            .map(|t| {
                member_returns.iter().map(|m| m[t]).sum::<f64>() / member_returns.len() as f64
            })
            .collect();
        headlines_for(&mut rng, sector, &mean_returns, start_ts, &mut headlines);
    }
    std::fs::write(root.join("sectors.csv"), sector_map).unwrap();
    std::fs::write(root.join("headlines.csv"), headlines).unwrap();

    let config = format!(
        r#"seed = 42
out_dir = "{out}"

[data]
ticks_dir = "{ticks}"
sector_map = "{map}"
headlines = "{heads}"

[bars]
label_interval_seconds = 120
model_interval_seconds = 300

[rolling]
insample_fraction = 0.5
refit_every = 200
taus = [0.01, 0.001]

[fit]
max_iterations = 1200
tolerance = 1e-8
starts = 2
seed = 0
min_obs = 100

[mcs]
alpha = 0.25
b_replications = 500
max_block_lag = 5
seed = 0
{extra}
"#,
        out = root.join("out").display(),
        ticks = ticks_dir.display(),
        map = root.join("sectors.csv").display(),
        heads = root.join("headlines.csv").display(),
        extra = config_extra,
    );
    let config_path = root.join("varcast.toml");
    std::fs::write(&config_path, config).unwrap();
    Fixture { root, config_path }
}

/// Scratch directory under the target dir, unique per test name.
pub fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("varcast-test-{name}-{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn varcast_bin() -> &'static str {
    env!("CARGO_BIN_EXE_varcast")
}

/// Every file under `dir`, relative paths sorted.
pub fn tree(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    fn walk(base: &Path, dir: &Path, files: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, files);
            } else {
                files.push(path.strip_prefix(base).unwrap().to_path_buf());
            }
        }
    }
    walk(dir, dir, &mut files);
    files.sort();
    files
}
