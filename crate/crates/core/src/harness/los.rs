use crate::array_manifold::UlaGeometry;
use crate::channel::{LosScenario, SelectionMatrix};
use crate::error::Result;
use crate::nulling::{pair_selection_search, PairSearchOptions};
use crate::rates::{interference_free_rate, sinr, tdma_mmse_benchmark, LinkRate};

use super::config::ExperimentConfig;
use super::sampling::{inject_directional_error, noise_var_for_snr};

pub(crate) const RX_USER: usize = 0;

pub(crate) fn scheme_labels(config: &ExperimentConfig) -> Vec<String> {
    let mut labels = vec!["ergodic_nulling".to_string()];
    if config.directional_error_deg > 0.0 {
        labels.push("ergodic_nulling_mismatched".into());
    }
    labels.push("tdma_mmse".into());
    labels.push("interference_free".into());
    labels
}

/// Rates of every scheme at one operating point, in [`scheme_labels`] order.
fn evaluate_point(
    config: &ExperimentConfig,
    truth: &LosScenario,
    believed: Option<&LosScenario>,
    geometry: &UlaGeometry,
) -> Result<Vec<f64>> {
    let options = PairSearchOptions {
        mode: config.pair_mode(),
        spacing: config.spacing_set(),
    };
    let matched = pair_selection_search(truth, RX_USER, geometry, &options)?;
    let mut row = vec![LinkRate::from_sinr(sinr(truth, RX_USER, &matched.beamformer, geometry)?).bits_per_use];
    if let Some(believed) = believed {
        let design = pair_selection_search(believed, RX_USER, geometry, &options)?;
        let actual = sinr(truth, RX_USER, &design.beamformer, geometry)?;
        row.push(LinkRate::from_sinr(actual).bits_per_use);
    }
    let tdma_pair = SelectionMatrix::new(vec![0, 1], geometry.num_elements())?;
    row.push(tdma_mmse_benchmark(truth, RX_USER, geometry, &tdma_pair)?);
    let support = SelectionMatrix::new(matched.beamformer.support().to_vec(), geometry.num_elements())?;
    row.push(interference_free_rate(truth, RX_USER, &support, geometry)?);
    Ok(row)
}

/// Per-SNR rates of one trial.
pub(crate) fn rate_vs_snr_trial(
    config: &ExperimentConfig,
    scenario: &LosScenario,
    error_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let geometry = UlaGeometry::with_aperture(config.d_max_wl, config.pitch_wl)?;
    let believed = (config.directional_error_deg > 0.0)
        .then(|| inject_directional_error(scenario, RX_USER, config.directional_error_deg, error_seed))
        .transpose()?;
    config
        .snr_grid_db
        .iter()
        .map(|&snr| {
            let nv = noise_var_for_snr(snr);
            let truth = scenario.with_noise_var(nv)?;
            let believed = believed.as_ref().map(|b| b.with_noise_var(nv)).transpose()?;
            evaluate_point(config, &truth, believed.as_ref(), &geometry)
        })
        .collect()
}

/// Per-aperture rates of one trial at the single configured SNR.
pub(crate) fn dmax_sweep_trial(
    config: &ExperimentConfig,
    scenario: &LosScenario,
    error_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let nv = noise_var_for_snr(config.snr_grid_db[0]);
    let truth = scenario.with_noise_var(nv)?;
    let believed = (config.directional_error_deg > 0.0)
        .then(|| inject_directional_error(&truth, RX_USER, config.directional_error_deg, error_seed))
        .transpose()?;
    config
        .d_max_grid_wl
        .iter()
        .map(|&d| {
            let geometry = UlaGeometry::with_aperture(d, config.pitch_wl)?;
            evaluate_point(config, &truth, believed.as_ref(), &geometry)
        })
        .collect()
}
