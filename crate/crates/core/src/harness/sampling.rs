//! Per-trial scenario draws.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::array_manifold::{Direction, UlaGeometry};
use crate::channel::{sample_direction, sample_paths, LosScenario, MimoScenario, PathSpec};
use crate::error::{Error, Result};

use super::config::{ExperimentConfig, ExperimentKind, PowerConvention};

/// Directions closer than this are treated as a degenerate draw.
pub const MIN_SEPARATION_RAD: f64 = 1e-6;

/// Desired transmit power; SNR and SIR are expressed relative to it.
pub const DESIRED_POWER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Los(LosScenario),
    Mimo(MimoScenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledScenario {
    /// Noise variance is 1; callers rescale per SNR point.
    pub scenario: Scenario,
    /// Degenerate draws discarded before this one.
    pub resampled: usize,
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

pub fn noise_var_for_snr(snr_db: f64) -> f64 {
    DESIRED_POWER / 10f64.powf(snr_db / 10.0)
}

/// Power of each interferer under the configured SIR convention.
pub fn interferer_power(sir_db: f64, interferers: usize, convention: PowerConvention) -> f64 {
    let total = DESIRED_POWER * 10f64.powf(-sir_db / 10.0);
    match convention {
        PowerConvention::Total => total / interferers.max(1) as f64,
        PowerConvention::Per => total,
    }
}

fn separated(dirs: &[Direction]) -> bool {
    let mut thetas: Vec<f64> = dirs.iter().map(|d| d.theta()).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.windows(2).all(|w| w[1] - w[0] >= MIN_SEPARATION_RAD)
}

fn los_directions(rng: &mut ChaCha8Rng, k: usize) -> (Vec<Direction>, usize) {
    let mut resampled = 0;
    loop {
        let dirs: Vec<Direction> = (0..k).map(|_| sample_direction(rng)).collect();
        if separated(&dirs) {
            return (dirs, resampled);
        }
        resampled += 1;
    }
}

/// Draws the scenario of one trial. Only receiver 0 is evaluated, so every
/// receiver is given receiver 0's view.
pub fn sample_scenario(config: &ExperimentConfig, trial_seed: u64) -> Result<SampledScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    match config.kind {
        ExperimentKind::Los4User | ExperimentKind::Los6User | ExperimentKind::DmaxSweep => {
            let k = config.num_users();
            let (dirs, resampled) = los_directions(&mut rng, k);
            let pi = interferer_power(config.sir_db, k - 1, config.interferer_power_convention);
            let mut power = vec![pi; k];
            power[0] = DESIRED_POWER;
            Ok(SampledScenario {
                scenario: Scenario::Los(LosScenario::from_receiver_view(dirs, power, 1.0)?),
                resampled,
            })
        }
        ExperimentKind::Mimo2x3 => {
            let (s, resampled) = mimo_scenario(config, &mut rng)?;
            Ok(SampledScenario {
                scenario: Scenario::Mimo(s),
                resampled,
            })
        }
    }
}

fn mimo_scenario(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<(MimoScenario, usize)> {
    let users = 1 + config.num_interferers;
    let mut resampled = 0;
    let paths = loop {
        let mut paths: Vec<Vec<Vec<PathSpec>>> = vec![vec![Vec::new(); users]; users];
        paths[0][0] = sample_paths(rng, config.desired_paths, config.path_gain_model, config.carrier_hz);
        for row in paths[0].iter_mut().skip(1) {
            *row = sample_paths(rng, 1, config.path_gain_model, config.carrier_hz);
        }
        let doas: Vec<Direction> = paths[0].iter().flatten().map(|p| p.doa).collect();
        if separated(&doas) {
            break paths;
        }
        resampled += 1;
    };
    let mut tx = vec![UlaGeometry::new(config.streams, 0.5)?];
    tx.extend((0..config.num_interferers).map(|_| UlaGeometry::new(1, 0.5).expect("one element")));
    let pi = interferer_power(
        config.sir_db,
        config.num_interferers,
        config.interferer_power_convention,
    );
    let mut power = vec![pi; users];
    power[0] = DESIRED_POWER;
    let scenario = MimoScenario::new(
        UlaGeometry::new(config.num_rx_elements, config.pitch_wl)?,
        tx,
        config.streams + 1,
        paths,
        power,
        1.0,
        config.carrier_hz,
    )?;
    Ok((scenario, resampled))
}

/// Receiver-side direction estimates: every direction seen by `rx_user`
/// plus i.i.d. Gaussian error of `sigma_deg`, clamped inside `(0, pi)`.
/// The draw comes from a stream separate from the scenario draw.
pub fn inject_directional_error(
    scenario: &LosScenario,
    rx_user: usize,
    sigma_deg: f64,
    seed: u64,
) -> Result<LosScenario> {
    scenario.check_user(rx_user)?;
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "directional error must be non-negative, got {sigma_deg}"
        )));
    }
    if sigma_deg == 0.0 {
        return Ok(scenario.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let normal = Normal::new(0.0, sigma_deg.to_radians()).expect("valid deviation");
    let margin = 1e-9;
    let believed: Vec<Direction> = scenario
        .doas_at(rx_user)
        .iter()
        .map(|d| {
            let theta = (d.theta() + normal.sample(&mut rng)).clamp(margin, PI - margin);
            Direction::new(theta).expect("clamped inside (0, pi)")
        })
        .collect();
    let table = (0..scenario.num_users())
        .map(|i| {
            if i == rx_user {
                believed.clone()
            } else {
                scenario.doas_at(i).to_vec()
            }
        })
        .collect();
    scenario.with_doas(table)
}

/// `count` directions in degrees, drawn as the samplers draw them.
pub fn uniform_angles_deg(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_direction(&mut rng).degrees()).collect()
}
