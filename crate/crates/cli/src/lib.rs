//! Config-driven experiment runner: strict JSON in, deterministic CSV and a
//! pass/fail summary out.

pub mod config;
pub mod output;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{default_config, parse_config, parse_with_overrides, Experiment, ExperimentConfig, Overrides};
pub use output::{report_summary, write_csv, CheckKey, ResultRow};
pub use runner::{columns, run};

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const INVALID_INPUT: u8 = 1;
    pub const NON_CONVERGENCE: u8 = 2;
    pub const CHECK_FAILED: u8 = 3;
    pub const IO: u8 = 4;
}

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    InvalidInput(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::InvalidInput(_) => exit::INVALID_INPUT,
            Failure::NonConvergence(_) => exit::NON_CONVERGENCE,
            Failure::Io(_) => exit::IO,
        }
    }
}

impl From<nlogis_core::Error> for Failure {
    fn from(e: nlogis_core::Error) -> Self {
        match e {
            nlogis_core::Error::NonConvergence { .. } => Failure::NonConvergence(e.to_string()),
            other => Failure::InvalidInput(other.to_string()),
        }
    }
}

/// Reads and validates a config file, or falls back to the defaults of
/// `selected` when no file is given.
pub fn load_config(
    path: Option<&Path>,
    selected: Option<Experiment>,
    overrides: Overrides,
) -> Result<ExperimentConfig, Failure> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            parse_with_overrides(&text, selected, overrides)
        }
        None => {
            let exp = selected.ok_or_else(|| Failure::InvalidInput("no experiment selected".into()))?;
            default_config(exp, overrides)
        }
    };
    cfg.map_err(|e| Failure::InvalidInput(format!("config error at {e}")))
}

/// Runs `cfg`, writes its CSV to `out` and returns the rows.
pub fn run_to_file(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ResultRow>, Failure> {
    let rows = run(cfg)?;
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", out.display()));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let file = fs::File::create(out).map_err(io)?;
    write_csv(std::io::BufWriter::new(file), columns(cfg.experiment), &rows).map_err(io)?;
    Ok(rows)
}

/// Output path: explicit override, then the config's `out`, then
/// `<experiment>.csv`.
pub fn output_path(cfg: &ExperimentConfig, cli_out: Option<&Path>) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.experiment)))
}

/// Experiments run by the `suite` subcommand, one CSV each.
pub const SUITE: [Experiment; 9] = [
    Experiment::Solve,
    Experiment::ThresholdRadius,
    Experiment::ExtCrossing,
    Experiment::Congruence,
    Experiment::Abundance,
    Experiment::Beat,
    Experiment::Periodic,
    Experiment::Transmission,
    Experiment::Strategic,
];
