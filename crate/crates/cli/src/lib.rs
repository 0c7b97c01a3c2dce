//! Command implementations behind the `ergonull` binary. Each command
//! returns a process exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergodic_nulling::array_manifold::{beam_pattern, uniform_direction_grid, Direction, UlaGeometry};
use ergodic_nulling::channel::LosScenario;
use ergodic_nulling::harness::{
    append_manifest, run_experiment, write_curve_csv, ExperimentConfig, ExperimentKind, ManifestEntry,
    PowerConvention,
};
use ergodic_nulling::nulling::{pair_selection_search, PairSearchOptions, SelectionResult, SpacingSet};
use ergodic_nulling::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Points in the exported beam pattern (0.1 degree spacing).
pub const PATTERN_POINTS: usize = 1800;

#[derive(Debug, Parser)]
#[command(name = "ergonull", version, about = "Interference nulling by antenna spacing selection")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Restrict partner antennas to whole-wavelength spacings.
    #[arg(long, global = true)]
    pub strict_integer_spacing: bool,
    #[arg(long, global = true, value_enum)]
    pub interferer_power_convention: Option<Convention>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Convention {
    Total,
    Per,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select a pair for a fixed LOS scenario and export its beam pattern.
    Beampattern(ScenarioArgs),
    /// Select a pair for a fixed LOS scenario and print the choice as JSON.
    Select(ScenarioArgs),
    /// Run a LOS experiment from --config.
    Run,
    /// Run a MIMO experiment from --config.
    MimoRun,
    /// List the experiment kinds a config may name.
    ListExperiments,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Directions of arrival in degrees, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub doas: Vec<f64>,
    /// Index of the desired user in --doas.
    #[arg(long, default_value_t = 0)]
    pub desired: usize,
    /// Array aperture in wavelengths.
    #[arg(long, default_value_t = 25.0)]
    pub d_max: f64,
    /// Element pitch in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    pub pitch: f64,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::ConfigParse { .. } => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_RUNTIME,
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

pub fn run(cli: Cli) -> i32 {
    match &cli.command {
        Command::Beampattern(args) => cmd_beampattern(&cli.global, args),
        Command::Select(args) => cmd_select(&cli.global, args),
        Command::Run => cmd_run(&cli.global, false),
        Command::MimoRun => cmd_run(&cli.global, true),
        Command::ListExperiments => cmd_list_experiments(),
    }
}

fn invalid_usage(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    EXIT_CONFIG
}

struct Selection {
    geometry: UlaGeometry,
    directions: Vec<Direction>,
    result: SelectionResult,
}

/// Equal-power scenario at 0 dB SNR, with the desired user moved to the
/// front.
fn select(global: &GlobalArgs, args: &ScenarioArgs) -> Result<Selection, i32> {
    if args.doas.is_empty() {
        return Err(invalid_usage("--doas needs at least one direction"));
    }
    if args.desired >= args.doas.len() {
        return Err(invalid_usage(format!(
            "--desired {} is out of range for {} directions",
            args.desired,
            args.doas.len()
        )));
    }
    let mut directions = Vec::with_capacity(args.doas.len());
    for &deg in &args.doas {
        match Direction::from_degrees(deg) {
            Ok(d) => directions.push(d),
            Err(e) => return Err(invalid_usage(e)),
        }
    }
    directions.swap(0, args.desired);
    let geometry = UlaGeometry::with_aperture(args.d_max, args.pitch).map_err(invalid_usage)?;
    let options = PairSearchOptions {
        spacing: if global.strict_integer_spacing {
            SpacingSet::IntegerWavelength
        } else {
            SpacingSet::AllMultiples
        },
        ..PairSearchOptions::default()
    };
    let result = LosScenario::from_receiver_view(directions.clone(), vec![1.0; directions.len()], 1.0)
        .and_then(|s| pair_selection_search(&s, 0, &geometry, &options))
        .map_err(|e| report(&e))?;
    if global.verbose {
        eprintln!(
            "selected antenna {} at {} wavelengths, phase {:.6} rad",
            result.antenna, result.spacing_wl, result.phase
        );
    }
    Ok(Selection {
        geometry,
        directions,
        result,
    })
}

fn selection_json(sel: &Selection) -> serde_json::Value {
    let gains: Vec<f64> = beam_pattern(&sel.result.beamformer, &sel.geometry, &sel.directions)
        .expect("support lies in the array");
    serde_json::json!({
        "spacing_wl": sel.result.spacing_wl,
        "phase_rad": sel.result.phase,
        "antenna": sel.result.antenna,
        "achieved_sinr": sel.result.achieved_sinr,
        "doas_deg": sel.directions.iter().map(|d| d.degrees()).collect::<Vec<_>>(),
        "gains": gains,
    })
}

fn create_out_dir(dir: &Path) -> Result<(), i32> {
    std::fs::create_dir_all(dir).map_err(|e| report(&Error::Io {
        path: dir.to_path_buf(),
        source: e,
    }))
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    std::fs::write(path, contents).map_err(|e| report(&Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))
}

pub fn cmd_beampattern(global: &GlobalArgs, args: &ScenarioArgs) -> i32 {
    let run = || -> Result<(), i32> {
        let sel = select(global, args)?;
        create_out_dir(&global.out)?;
        let grid = uniform_direction_grid(PATTERN_POINTS);
        let gains = beam_pattern(&sel.result.beamformer, &sel.geometry, &grid).map_err(|e| report(&e))?;
        let mut csv = String::from("theta_deg,gain\n");
        for (d, g) in grid.iter().zip(&gains) {
            csv.push_str(&format!("{},{}\n", d.degrees(), g));
        }
        write_file(&global.out.join("beampattern.csv"), &csv)?;
        let sidecar = serde_json::to_string_pretty(&selection_json(&sel)).expect("json value");
        write_file(&global.out.join("beampattern.json"), &(sidecar + "\n"))
    };
    run().err().unwrap_or(EXIT_OK)
}

pub fn cmd_select(global: &GlobalArgs, args: &ScenarioArgs) -> i32 {
    match select(global, args) {
        Ok(sel) => {
            println!("{}", selection_json(&sel));
            EXIT_OK
        }
        Err(code) => code,
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig, Error> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| Error::Config {
            field: "--config".into(),
            message: "a configuration file is required".into(),
        })?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if global.strict_integer_spacing {
        config.strict_integer_spacing = true;
    }
    if let Some(c) = global.interferer_power_convention {
        config.interferer_power_convention = match c {
            Convention::Total => PowerConvention::Total,
            Convention::Per => PowerConvention::Per,
        };
    }
    config.validate()?;
    Ok(config)
}

pub fn cmd_run(global: &GlobalArgs, mimo: bool) -> i32 {
    let config = match load_config(global) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    if mimo != (config.kind == ExperimentKind::Mimo2x3) {
        let hint = if mimo { "run" } else { "mimo-run" };
        return invalid_usage(format!(
            "experiment kind `{}` is run with the `{hint}` subcommand",
            config.kind.as_str()
        ));
    }
    if let Err(code) = create_out_dir(&global.out) {
        return code;
    }
    let start = Instant::now();
    let curve = match run_experiment(&config, global.threads) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    let wall = start.elapsed().as_secs_f64();
    let csv_name = PathBuf::from(format!("{}.csv", config.name));
    let result = write_curve_csv(&curve, &global.out.join(&csv_name)).and_then(|()| {
        append_manifest(
            &global.out.join("manifest.jsonl"),
            &ManifestEntry::new(&config, &curve, wall, csv_name),
        )
    });
    if let Err(e) = result {
        return report(&e);
    }
    if global.verbose {
        eprintln!(
            "{}: {} trials, {} excluded, {:.1} s",
            config.name, curve.trials, curve.exclusions, wall
        );
    }
    EXIT_OK
}

pub fn cmd_list_experiments() -> i32 {
    for kind in ExperimentKind::ALL {
        println!("{:<12} {}", kind.as_str(), kind.description());
    }
    EXIT_OK
}
