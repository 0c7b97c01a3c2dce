use crate::channel::MimoScenario;
use crate::error::Result;
use crate::mimo::{full_subset_search, per_stream_pair_search, support_rates, StreamSearchOptions};

use super::config::ExperimentConfig;
use super::sampling::noise_var_for_snr;

const RX_USER: usize = 0;

pub(crate) fn scheme_labels() -> Vec<String> {
    [
        "simplified",
        "simplified_interference_free",
        "optimal",
        "optimal_interference_free",
        "max_interference_free",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Per-SNR rates of one trial, in [`scheme_labels`] order.
pub(crate) fn mimo_trial(config: &ExperimentConfig, scenario: &MimoScenario) -> Result<Vec<Vec<f64>>> {
    let options = StreamSearchOptions {
        mode: config.pair_mode(),
        target: config.stream_mode,
        refine: config.refine,
    };
    config
        .snr_grid_db
        .iter()
        .map(|&snr| {
            let s = scenario.with_noise_var(noise_var_for_snr(snr))?;
            let assignment = per_stream_pair_search(&s, RX_USER, &options)?;
            let simplified = support_rates(&s, RX_USER, &assignment.support())?;
            let optimal = full_subset_search(&s, RX_USER, config.streams + 1)?;
            Ok(vec![
                simplified.with_interference,
                simplified.interference_free,
                optimal.rate,
                optimal.interference_free_rate,
                optimal.max_interference_free_rate,
            ])
        })
        .collect()
}
