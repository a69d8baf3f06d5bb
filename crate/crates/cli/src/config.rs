//! Experiment configuration files.
//!
//! A config is a TOML document whose top level holds the scenario (`size`,
//! `spacing`, `[[peaks]]`, `[noise]`, `[kernel]`) and whose optional
//! `[experiment]` table holds the Monte Carlo settings, including an
//! optional `[experiment.sweep]`.

use std::fs;
use std::path::Path;

use stem_core::experiment::{ExperimentConfig, ExperimentSettings};
use stem_core::{ScenarioSpec, StemError};

pub fn parse_config(text: &str) -> Result<ExperimentConfig, StemError> {
    let mut table: toml::Table = text.parse().map_err(|e| invalid(&e))?;
    let settings = match table.remove("experiment") {
        Some(v) => v
            .try_into::<ExperimentSettings>()
            .map_err(|e| StemError::Invalid(format!("[experiment]: {e}")))?,
        None => ExperimentSettings::default(),
    };
    let scenario: ScenarioSpec = toml::Value::Table(table).try_into().map_err(|e| invalid(&e))?;
    let config = ExperimentConfig::new(scenario, settings);
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, StemError> {
    let text = fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        StemError::Invalid(msg) => StemError::Invalid(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn invalid(e: &toml::de::Error) -> StemError {
    StemError::Invalid(e.message().trim().to_string())
}
