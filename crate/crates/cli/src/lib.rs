//! Experiment runner for the trbeam link simulator.
//!
//! [`run_experiment`] executes one named experiment, writes its tables as
//! CSV and/or JSON together with a `manifest.json`, and reports which files
//! were produced.

pub mod analysis;
pub mod compare;
pub mod config;
pub mod experiments;
pub mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

pub use config::{validate_config, ExperimentConfig, Format};
pub use table::Table;

/// Errors reported by the CLI, one variant per exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<trbeam_core::Error> for CliError {
    fn from(e: trbeam_core::Error) -> Self {
        match e {
            trbeam_core::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub tables: Vec<Table>,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Validates `cfg`, runs the experiment and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(CliError::Config(violations.join("; ")));
    }
    let start = Instant::now();
    let tables = experiments::run(cfg)?;
    let runtime = start.elapsed().as_secs_f64();

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for t in &tables {
        if cfg.format.csv() {
            let path = dir.join(format!("{}.csv", t.name));
            write(&path, &t.to_csv()?)?;
            files.push(path);
        }
        if cfg.format.json() {
            let path = dir.join(format!("{}.json", t.name));
            let text = serde_json::to_string_pretty(&t.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
            write(&path, &(text + "\n"))?;
            files.push(path);
        }
    }
    let manifest = json!({
        "experiment": cfg.experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "full_scale": cfg.full_scale,
        "config": cfg,
        "runtime_seconds": runtime,
        "files": files.iter().map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write(&path, &(text + "\n"))?;
    files.push(path);
    Ok(RunOutput { files, tables })
}
