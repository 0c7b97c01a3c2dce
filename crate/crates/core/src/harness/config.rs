//! Experiment configuration, read from TOML.
//!
//! Required keys: `name`, `kind`, `num_trials`, `snr_grid_db`, `seed`.
//! Everything else has a default matching the four-user LOS setup.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::PathGainModel;
use crate::error::{Error, Result};
use crate::mimo::StreamTargetMode;
use crate::nulling::{PairMode, SpacingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "los-4user")]
    Los4User,
    #[serde(rename = "los-6user")]
    Los6User,
    DmaxSweep,
    #[serde(rename = "mimo-2x3")]
    Mimo2x3,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Los4User,
        ExperimentKind::Los6User,
        ExperimentKind::DmaxSweep,
        ExperimentKind::Mimo2x3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Los4User => "los-4user",
            ExperimentKind::Los6User => "los-6user",
            ExperimentKind::DmaxSweep => "dmax-sweep",
            ExperimentKind::Mimo2x3 => "mimo-2x3",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Los4User => "four-user LOS channel, rate vs SNR",
            ExperimentKind::Los6User => "six-user LOS channel, rate vs SNR",
            ExperimentKind::DmaxSweep => "four-user LOS channel, rate vs array aperture",
            ExperimentKind::Mimo2x3 => "2x3 MIMO link with external interferers, rate vs SNR",
        }
    }

    fn default_users(self) -> usize {
        match self {
            ExperimentKind::Los6User => 6,
            _ => 4,
        }
    }
}

/// How `sir_db` splits across interferers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerConvention {
    /// `sir_db` is desired power over the summed interferer power.
    #[default]
    Total,
    /// `sir_db` is desired power over each interferer's power.
    Per,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamformerMode {
    #[default]
    ClosedForm,
    PhaseGrid,
}

fn default_sir_db() -> f64 {
    -5.0
}
fn default_d_max_wl() -> f64 {
    100.0
}
fn default_pitch_wl() -> f64 {
    0.5
}
fn default_phi_grid_deg() -> f64 {
    1.0
}
fn default_num_interferers() -> usize {
    2
}
fn default_num_rx_elements() -> usize {
    100
}
fn default_streams() -> usize {
    2
}
fn default_desired_paths() -> usize {
    2
}
fn default_max_full_search_elements() -> usize {
    128
}
fn default_carrier_hz() -> f64 {
    28e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub num_trials: usize,
    pub snr_grid_db: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_sir_db")]
    pub sir_db: f64,
    #[serde(default = "default_d_max_wl")]
    pub d_max_wl: f64,
    /// Apertures swept by `dmax-sweep`.
    #[serde(default)]
    pub d_max_grid_wl: Vec<f64>,
    #[serde(default = "default_pitch_wl")]
    pub pitch_wl: f64,
    #[serde(default = "default_phi_grid_deg")]
    pub phi_grid_deg: f64,
    #[serde(default)]
    pub beamformer: BeamformerMode,
    /// Standard deviation of the receiver's direction estimates; a
    /// mismatched scheme is reported when positive.
    #[serde(default)]
    pub directional_error_deg: f64,
    /// LOS user count; defaults to the kind's natural value.
    #[serde(default)]
    pub num_users: Option<usize>,
    #[serde(default = "default_num_interferers")]
    pub num_interferers: usize,
    #[serde(default = "default_num_rx_elements")]
    pub num_rx_elements: usize,
    #[serde(default = "default_streams")]
    pub streams: usize,
    #[serde(default = "default_desired_paths")]
    pub desired_paths: usize,
    #[serde(default)]
    pub interferer_power_convention: PowerConvention,
    #[serde(default)]
    pub strict_integer_spacing: bool,
    #[serde(default)]
    pub stream_mode: StreamTargetMode,
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub path_gain_model: PathGainModel,
    #[serde(default = "default_max_full_search_elements")]
    pub max_full_search_elements: usize,
    #[serde(default)]
    pub allow_large_full_search: bool,
    #[serde(default = "default_carrier_hz")]
    pub carrier_hz: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn num_users(&self) -> usize {
        self.num_users.unwrap_or(self.kind.default_users())
    }

    pub fn pair_mode(&self) -> PairMode {
        match self.beamformer {
            BeamformerMode::ClosedForm => PairMode::ClosedForm,
            BeamformerMode::PhaseGrid => PairMode::PhaseGrid {
                step_deg: self.phi_grid_deg,
            },
        }
    }

    pub fn spacing_set(&self) -> SpacingSet {
        if self.strict_integer_spacing {
            SpacingSet::IntegerWavelength
        } else {
            SpacingSet::AllMultiples
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        };
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::config(
                "name",
                "must be non-empty and use only letters, digits, '-' or '_'",
            ));
        }
        if self.num_trials == 0 {
            return Err(Error::config("num_trials", "must be at least 1"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::config("snr_grid_db", "must not be empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr_grid_db", "values must be finite"));
        }
        if !self.sir_db.is_finite() {
            return Err(Error::config("sir_db", "must be finite"));
        }
        positive("pitch_wl", self.pitch_wl)?;
        positive("d_max_wl", self.d_max_wl)?;
        positive("carrier_hz", self.carrier_hz)?;
        if !(self.phi_grid_deg > 0.0 && self.phi_grid_deg <= 360.0) {
            return Err(Error::config("phi_grid_deg", "must lie in (0, 360]"));
        }
        if !(self.directional_error_deg >= 0.0 && self.directional_error_deg.is_finite()) {
            return Err(Error::config("directional_error_deg", "must be non-negative"));
        }
        match self.kind {
            ExperimentKind::Los4User | ExperimentKind::Los6User | ExperimentKind::DmaxSweep => {
                if self.num_users() < 2 {
                    return Err(Error::config("num_users", "needs at least two users"));
                }
                if self.d_max_wl < self.pitch_wl {
                    return Err(Error::config("d_max_wl", "must be at least one pitch"));
                }
            }
            ExperimentKind::Mimo2x3 => {
                if self.streams == 0 {
                    return Err(Error::config("streams", "must be at least 1"));
                }
                if self.desired_paths < self.streams {
                    return Err(Error::config(
                        "desired_paths",
                        "must be at least the number of streams",
                    ));
                }
                if self.num_rx_elements < self.streams + 1 {
                    return Err(Error::config(
                        "num_rx_elements",
                        "must exceed the number of streams",
                    ));
                }
                if self.num_rx_elements > self.max_full_search_elements
                    && !self.allow_large_full_search
                {
                    return Err(Error::config(
                        "num_rx_elements",
                        format!(
                            "{} exceeds max_full_search_elements = {}; set allow_large_full_search = true to proceed",
                            self.num_rx_elements, self.max_full_search_elements
                        ),
                    ));
                }
            }
        }
        if self.kind == ExperimentKind::DmaxSweep {
            if self.d_max_grid_wl.is_empty() {
                return Err(Error::config("d_max_grid_wl", "must not be empty for dmax-sweep"));
            }
            if let Some(d) = self
                .d_max_grid_wl
                .iter()
                .find(|&&d| !(d >= self.pitch_wl && d.is_finite()))
            {
                return Err(Error::config(
                    "d_max_grid_wl",
                    format!("aperture {d} is smaller than one pitch"),
                ));
            }
            if self.snr_grid_db.len() != 1 {
                return Err(Error::config("snr_grid_db", "dmax-sweep takes exactly one SNR"));
            }
        }
        Ok(())
    }
}
