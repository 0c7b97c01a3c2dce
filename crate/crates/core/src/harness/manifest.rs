//! Append-only run log, one JSON object per line.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::csv::RateCurve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: usize,
    pub exclusions: usize,
    pub resampled: usize,
    pub wall_time_s: f64,
    pub csv: PathBuf,
}

impl ManifestEntry {
    pub fn new(config: &ExperimentConfig, curve: &RateCurve, wall_time_s: f64, csv: PathBuf) -> Self {
        Self {
            name: config.name.clone(),
            kind: config.kind.as_str().to_string(),
            config_sha256: config.digest(),
            seed: config.seed,
            trials: curve.trials,
            exclusions: curve.exclusions,
            resampled: curve.resampled,
            wall_time_s,
            csv,
        }
    }
}

pub fn append_manifest(path: &Path, entry: &ManifestEntry) -> Result<()> {
    let line = serde_json::to_string(entry).expect("manifest entries serialize");
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(file, "{line}").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::ConfigParse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}
