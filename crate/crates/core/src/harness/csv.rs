//! Rate curves and their CSV form.
//!
//! Layout: one header row `<x_label>,<scheme>_mean,<scheme>_stderr,...`,
//! then one row per x value. Numbers use Rust's shortest round-trip decimal
//! formatting, so files are byte-identical for identical inputs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSeries {
    pub label: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub x_label: String,
    pub x: Vec<f64>,
    pub schemes: Vec<SchemeSeries>,
    /// Trials contributing to every point.
    pub trials: usize,
    /// Trials dropped because they failed.
    pub exclusions: usize,
    /// Degenerate draws replaced before use.
    pub resampled: usize,
}

impl RateCurve {
    pub fn scheme(&self, label: &str) -> Option<&SchemeSeries> {
        self.schemes.iter().find(|s| s.label == label)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.x_label);
        for s in &self.schemes {
            let _ = write!(out, ",{0}_mean,{0}_stderr", s.label);
        }
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            let _ = write!(out, "{x}");
            for s in &self.schemes {
                let _ = write!(out, ",{},{}", s.mean[i], s.stderr[i]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn write_curve_csv(curve: &RateCurve, path: &Path) -> Result<()> {
    std::fs::write(path, curve.to_csv_string()).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_curve_csv`]. Run bookkeeping (trial and
/// exclusion counts) is not stored in the CSV and comes back as zero.
pub fn read_curve_csv(path: &Path) -> Result<RateCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve_csv(&text).map_err(|message| Error::ConfigParse {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_curve_csv(text: &str) -> std::result::Result<RateCurve, String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty file")?.split(',').collect();
    let x_label = header[0].to_string();
    let columns = &header[1..];
    if !columns.len().is_multiple_of(2) {
        return Err("scheme columns must come in mean/stderr pairs".into());
    }
    let mut schemes = Vec::new();
    for pair in columns.chunks(2) {
        let label = pair[0]
            .strip_suffix("_mean")
            .ok_or_else(|| format!("column `{}` should end in _mean", pair[0]))?;
        if pair[1] != format!("{label}_stderr") {
            return Err(format!("column `{}` should be {label}_stderr", pair[1]));
        }
        schemes.push(SchemeSeries {
            label: label.to_string(),
            mean: Vec::new(),
            stderr: Vec::new(),
        });
    }
    let mut x = Vec::new();
    for (row, line) in lines.enumerate() {
        let values = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: {e}", row + 2)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.len() != header.len() {
            return Err(format!("row {} has {} fields, expected {}", row + 2, values.len(), header.len()));
        }
        x.push(values[0]);
        for (s, pair) in schemes.iter_mut().zip(values[1..].chunks(2)) {
            s.mean.push(pair[0]);
            s.stderr.push(pair[1]);
        }
    }
    Ok(RateCurve {
        x_label,
        x,
        schemes,
        trials: 0,
        exclusions: 0,
        resampled: 0,
    })
}
