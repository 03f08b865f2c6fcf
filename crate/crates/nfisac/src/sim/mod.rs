//! Experiment harness: configuration, dispatch to the built-in experiments,
//! and CSV emission.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;

pub use config::{ScenarioConfig, ValidationReport, EXPERIMENTS};
pub use experiments::{stream_rng, trial_rng};
pub use output::{CsvTable, ExperimentResult, PlotSpec, Record};

use crate::error::{Error, Result};

/// Runs the experiment named in the configuration.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    let (tables, records, warnings) = match cfg.name() {
        "squint-deviation" => experiments::squint_deviation_exp(cfg)?,
        "angular-spread" => experiments::angular_spread_exp(cfg)?,
        "wavenumber-calibration" => experiments::wavenumber_calibration_exp(cfg)?,
        "music-vs-wavenumber" => experiments::music_vs_wavenumber_exp(cfg)?,
        "rmse-vs-snr" => experiments::rmse_vs_snr_exp(cfg)?,
        "rate-vs-sensing-budget" => experiments::rate_vs_sensing_budget_exp(cfg)?,
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    };
    Ok(ExperimentResult {
        experiment: cfg.name().to_string(),
        seed: cfg.seed(),
        config_sha256: output::sha256_hex(cfg.canonical().as_bytes()),
        tables,
        records,
        warnings,
    })
}

/// Reads and validates a configuration file.
pub fn validate_config(path: &Path) -> Result<ValidationReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(config::validate_text(&text))
}

/// Loads a configuration file, failing with the full report when invalid.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_text(&text).map_err(|r| Error::Config(r.to_string()))
}

/// Names and one-line descriptions of the built-in experiments.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    EXPERIMENTS.iter().map(|n| (*n, config::describe(n))).collect()
}
