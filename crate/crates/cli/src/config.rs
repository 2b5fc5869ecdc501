//! Experiment configuration: a TOML file plus flag overrides, and a stable
//! hash of the resolved configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use varcast_core::combine::KernelSign;
use varcast_core::dist::LawKind;
use varcast_core::error::{Error, Result};
use varcast_core::estimate::FitConfig;
use varcast_core::forecast::RollConfig;
use varcast_core::mcs::McsConfig;
use varcast_core::model::{Dynamics, ModelSpec, RegressorKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of per-instrument tick CSVs (`<instrument_id>.csv`).
    pub ticks_dir: PathBuf,
    /// CSV mapping `instrument_id,sector`.
    pub sector_map: PathBuf,
    /// Headline CSV (`timestamp,id,text`); optional for ingest-only runs.
    #[serde(default)]
    pub headlines: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarConfig {
    /// Grid used for headline labelling (the market-response frame).
    pub label_interval_seconds: u32,
    /// Grid used for modelling and regressor alignment.
    pub model_interval_seconds: u32,
}

impl Default for BarConfig {
    fn default() -> Self {
        Self {
            label_interval_seconds: 120,
            model_interval_seconds: 300,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelGridConfig {
    pub dynamics: Vec<String>,
    pub laws: Vec<String>,
    pub regressors: Vec<String>,
}

impl Default for ModelGridConfig {
    fn default() -> Self {
        Self {
            dynamics: vec!["garch".into(), "egarch".into(), "gjr".into()],
            laws: vec!["gauss".into(), "t".into(), "ged".into()],
            regressors: vec!["n".into(), "iv".into(), "se".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentConfig {
    /// Fisher retention threshold; None selects the 75th percentile of the
    /// pooled nonzero scores.
    #[serde(default)]
    pub f_threshold: Option<f64>,
    #[serde(default = "default_tail_prob")]
    pub p_neg: f64,
    #[serde(default = "default_tail_prob")]
    pub p_pos: f64,
    #[serde(default = "default_tail_prob")]
    pub p_high: f64,
}

fn default_tail_prob() -> f64 {
    0.025
}

impl Default for SentimentConfig {
    fn default() -> Self {
        Self {
            f_threshold: None,
            p_neg: 0.025,
            p_pos: 0.025,
            p_high: 0.025,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombineConfig {
    /// +1 applies the kernel literally; -1 (default) up-weights models with
    /// smaller loss.
    pub kernel_sign: f64,
}

impl Default for CombineConfig {
    fn default() -> Self {
        Self { kernel_sign: -1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub bars: BarConfig,
    #[serde(default)]
    pub rolling: RollConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub models: ModelGridConfig,
    #[serde(default)]
    pub mcs: McsConfig,
    #[serde(default)]
    pub combine: CombineConfig,
    #[serde(default)]
    pub sentiment: SentimentConfig,
    /// Engle-Manganelli lag count.
    #[serde(default = "default_dq_lags")]
    pub dq_lags: usize,
}

fn default_dq_lags() -> usize {
    4
}

/// Flag overrides applied on top of the file (flags win).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub taus: Option<Vec<f64>>,
    pub kernel_sign: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("config parse error: {e}")))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(out) = &overrides.out_dir {
            config.out_dir = out.clone();
        }
        if let Some(taus) = &overrides.taus {
            config.rolling.taus = taus.clone();
        }
        if let Some(sign) = overrides.kernel_sign {
            config.combine.kernel_sign = sign;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.rolling.validate()?;
        self.mcs.validate()?;
        KernelSign::from_f64(self.combine.kernel_sign)?;
        if self.bars.label_interval_seconds == 0 || self.bars.model_interval_seconds == 0 {
            return Err(Error::InvalidInput("bar intervals must be positive".into()));
        }
        if self.model_grid()?.is_empty() {
            return Err(Error::InvalidInput("empty model grid".into()));
        }
        if !self.data.ticks_dir.is_dir() {
            return Err(Error::InvalidInput(format!(
                "ticks_dir {} is not a directory",
                self.data.ticks_dir.display()
            )));
        }
        if !self.data.sector_map.is_file() {
            return Err(Error::InvalidInput(format!(
                "sector_map {} is not a file",
                self.data.sector_map.display()
            )));
        }
        if let Some(h) = &self.data.headlines {
            if !h.is_file() {
                return Err(Error::InvalidInput(format!(
                    "headlines {} is not a file",
                    h.display()
                )));
            }
        }
        Ok(())
    }

    pub fn kernel_sign(&self) -> KernelSign {
        KernelSign::from_f64(self.combine.kernel_sign).expect("validated")
    }

    pub fn model_grid(&self) -> Result<Vec<ModelSpec>> {
        let mut grid = Vec::new();
        for d in &self.models.dynamics {
            let dynamics = parse_dynamics(d)?;
            for l in &self.models.laws {
                let law = parse_law(l)?;
                for r in &self.models.regressors {
                    let regressors = parse_regressors(r)?;
                    grid.push(ModelSpec {
                        dynamics,
                        law,
                        regressors,
                    });
                }
            }
        }
        Ok(grid)
    }

    /// Stable FNV-1a hash of the resolved configuration. Serialization uses
    /// the struct field order, so reordering keys in the file cannot change
    /// the hash.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

pub fn parse_dynamics(s: &str) -> Result<Dynamics> {
    match s {
        "garch" => Ok(Dynamics::Garch),
        "egarch" => Ok(Dynamics::Egarch),
        "gjr" => Ok(Dynamics::Gjr),
        _ => Err(Error::InvalidInput(format!("unknown dynamics `{s}`"))),
    }
}

pub fn parse_law(s: &str) -> Result<LawKind> {
    match s {
        "gauss" => Ok(LawKind::Gaussian),
        "t" => Ok(LawKind::StudentT),
        "ged" => Ok(LawKind::Ged),
        _ => Err(Error::InvalidInput(format!("unknown error law `{s}`"))),
    }
}

pub fn parse_regressors(s: &str) -> Result<RegressorKind> {
    match s {
        "n" => Ok(RegressorKind::None),
        "iv" => Ok(RegressorKind::InfoVolume),
        "se" => Ok(RegressorKind::Sentiment),
        _ => Err(Error::InvalidInput(format!("unknown regressor set `{s}`"))),
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// All stage randomness derives from the root seed and a stage label, so any
/// stage can be reproduced in isolation.
pub fn stage_seed(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a64(label.as_bytes()))
}
