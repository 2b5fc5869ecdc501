//! Run manifest: configuration hash, tool version, per-stage timing, emitted
//! files grouped by stage, warnings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use varcast_core::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub stage_timings_ms: Vec<StageRecord>,
    /// Files emitted under the output directory, grouped by the stage that
    /// wrote them; relative paths with `/` separators, sorted.
    pub files: BTreeMap<String, Vec<String>>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    current_stage: String,
    #[serde(skip)]
    stage_start: Option<Instant>,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            current_stage: "setup".into(),
            ..Default::default()
        }
    }

    /// Open a new stage; any open stage is closed and its timing recorded.
    pub fn begin_stage(&mut self, stage: impl Into<String>) {
        self.end_stage();
        self.current_stage = stage.into();
        self.stage_start = Some(Instant::now());
    }

    pub fn end_stage(&mut self) {
        if let Some(start) = self.stage_start.take() {
            self.stage_timings_ms.push(StageRecord {
                stage: self.current_stage.clone(),
                millis: start.elapsed().as_millis(),
            });
        }
    }

    pub fn record_file(&mut self, out_dir: &Path, path: &Path) {
        let rel = path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        self.files
            .entry(self.current_stage.clone())
            .or_default()
            .push(rel);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Every recorded file, flattened and sorted.
    pub fn all_files(&self) -> Vec<String> {
        let mut all: Vec<String> = self.files.values().flatten().cloned().collect();
        all.sort();
        all.dedup();
        all
    }

    /// Write the manifest itself (listing itself under its own stage).
    pub fn write(&mut self, out_dir: &Path) -> Result<PathBuf> {
        self.end_stage();
        self.current_stage = "manifest".into();
        let path = out_dir.join("manifest.json");
        self.record_file(out_dir, &path);
        for list in self.files.values_mut() {
            list.sort();
            list.dedup();
        }
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}
