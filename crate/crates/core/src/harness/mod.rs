//! Monte Carlo experiments: configuration, trial loop, aggregation and
//! output files.

pub mod config;
pub mod csv;
mod los;
pub mod manifest;
mod mimo;
pub mod sampling;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{BeamformerMode, ExperimentConfig, ExperimentKind, PowerConvention};
pub use csv::{read_curve_csv, write_curve_csv, RateCurve, SchemeSeries};
pub use manifest::{append_manifest, read_manifest, ManifestEntry};
pub use sampling::{sample_scenario, trial_seed, SampledScenario, Scenario};

/// Every scheme's rate in one trial, indexed `[x][scheme]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub values: Vec<Vec<f64>>,
}

/// Raw per-trial results before averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub x_label: String,
    pub x: Vec<f64>,
    pub labels: Vec<String>,
    pub records: Vec<TrialRecord>,
    pub exclusions: usize,
    pub resampled: usize,
}

impl TrialSet {
    pub fn scheme_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Sample mean and standard error of the mean at every point.
    pub fn aggregate(&self) -> RateCurve {
        let n = self.records.len();
        let schemes = self
            .labels
            .iter()
            .enumerate()
            .map(|(s, label)| {
                let (mean, stderr) = (0..self.x.len())
                    .map(|i| mean_stderr(self.records.iter().map(|r| r.values[i][s])))
                    .unzip();
                SchemeSeries {
                    label: label.clone(),
                    mean,
                    stderr,
                }
            })
            .collect();
        RateCurve {
            x_label: self.x_label.clone(),
            x: self.x.clone(),
            schemes,
            trials: n,
            exclusions: self.exclusions,
            resampled: self.resampled,
        }
    }
}

fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn x_axis(config: &ExperimentConfig) -> (String, Vec<f64>) {
    match config.kind {
        ExperimentKind::DmaxSweep => ("d_max_wl".into(), config.d_max_grid_wl.clone()),
        _ => ("snr_db".into(), config.snr_grid_db.clone()),
    }
}

fn scheme_labels(config: &ExperimentConfig) -> Vec<String> {
    match config.kind {
        ExperimentKind::Mimo2x3 => mimo::scheme_labels(),
        _ => los::scheme_labels(config),
    }
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> (Result<Vec<Vec<f64>>>, usize) {
    let seed = trial_seed(config.seed, trial);
    let sampled = match sample_scenario(config, seed) {
        Ok(s) => s,
        Err(e) => return (Err(e), 0),
    };
    let values = match (&sampled.scenario, config.kind) {
        (Scenario::Mimo(s), _) => mimo::mimo_trial(config, s),
        (Scenario::Los(s), ExperimentKind::DmaxSweep) => los::dmax_sweep_trial(config, s, seed),
        (Scenario::Los(s), _) => los::rate_vs_snr_trial(config, s, seed),
    };
    let values = values.and_then(|v| {
        if v.iter().flatten().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Singular("non-finite rate"))
        }
    });
    (values, sampled.resampled)
}

/// Runs every trial on the current rayon pool. Failing trials are counted
/// as exclusions; the run fails only if no trial succeeds.
pub fn run_trials(config: &ExperimentConfig) -> Result<TrialSet> {
    config.validate()?;
    let outcomes: Vec<_> = (0..config.num_trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let mut exclusions = 0;
    let mut resampled = 0;
    let mut first_error = None;
    for (trial, (values, r)) in outcomes.into_iter().enumerate() {
        resampled += r;
        match values {
            Ok(values) => records.push(TrialRecord {
                trial,
                seed: trial_seed(config.seed, trial),
                values,
            }),
            Err(e) => {
                exclusions += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if records.is_empty() {
        if let Some(e) = first_error {
            return Err(e);
        }
    }
    let (x_label, x) = x_axis(config);
    Ok(TrialSet {
        x_label,
        x,
        labels: scheme_labels(config),
        records,
        exclusions,
        resampled,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("thread count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the experiment and averages over trials.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<RateCurve> {
    with_threads(threads, || run_trials(config))?.map(|set| set.aggregate())
}

/// LOS experiment (`los-4user`, `los-6user` or `dmax-sweep`) on the
/// global pool.
pub fn run_rate_vs_snr(config: &ExperimentConfig) -> Result<RateCurve> {
    if config.kind == ExperimentKind::Mimo2x3 {
        return Err(Error::config("kind", "expected a LOS experiment"));
    }
    run_experiment(config, None)
}

/// `mimo-2x3` experiment on the global pool.
pub fn run_mimo_experiment(config: &ExperimentConfig) -> Result<RateCurve> {
    if config.kind != ExperimentKind::Mimo2x3 {
        return Err(Error::config("kind", "expected `mimo-2x3`"));
    }
    run_experiment(config, None)
}
