//! Batch front end for the `leastbias` toolkit.
//!
//! A run is described by a JSON [`RunConfig`]; [`run`] dispatches it to the
//! matching module and returns a [`RunReport`] plus CSV artifacts, which
//! [`write_outputs`] places in the output directory.

pub mod commands;
pub mod config;
pub mod suite;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{Command, RunConfig, SCHEMA_VERSION};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed config at {pointer:?}: {message}")]
    Config { pointer: String, message: String },
    #[error(transparent)]
    Core(#[from] leastbias::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 when a solver did not converge, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(leastbias::Error::Convergence { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub command: String,
    pub inputs_echo: RunConfig,
    /// Depends only on the config; identical configs give identical bytes.
    pub results: Value,
    pub timing_ms: u64,
    /// Wall-clock time per suite criterion, kept apart from `results`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion_timings: Option<Value>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
    /// Failed suite criteria; empty for every other command.
    pub failures: Vec<String>,
}

pub fn run(config: &RunConfig) -> Result<Execution, CliError> {
    let start = Instant::now();
    log::info!("running {}", config.command.name());
    let out = commands::dispatch(config)?;
    let report = RunReport {
        schema_version: SCHEMA_VERSION.into(),
        command: config.command.name().into(),
        inputs_echo: config.clone(),
        results: out.results,
        timing_ms: start.elapsed().as_millis() as u64,
        criterion_timings: out.timings,
        tool_version: TOOL_VERSION.into(),
    };
    Ok(Execution { report, artifacts: out.artifacts, failures: out.failures })
}

/// Writes `report.json` and the artifacts; returns the paths written.
pub fn write_outputs(exec: &Execution, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(exec.artifacts.len() + 1);
    let report = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&exec.report).expect("report serializes");
    text.push('\n');
    fs::write(&report, text)?;
    written.push(report);
    for a in &exec.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Human-readable catalogue for `--list-families`.
pub fn family_listing() -> String {
    let mut s = String::new();
    let mut section = |title: &str, names: &[&str]| {
        s.push_str(title);
        s.push('\n');
        for n in names {
            s.push_str("  ");
            s.push_str(n);
            s.push('\n');
        }
    };
    section("metric families (curvature: parameters.family)", &leastbias::geometry::MetricSpec::<f64>::FAMILIES);
    section("frame configurations (cartan: parameters.configuration.frame)", &commands::FRAME_FAMILIES);
    section("wire frames (film: parameters.frame.family)", &commands::WIRE_FAMILIES);
    section("potentials (schrodinger: parameters.potential.kind)", &commands::POTENTIAL_KINDS);
    s
}
