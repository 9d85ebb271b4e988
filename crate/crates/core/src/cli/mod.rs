//! Command-line front end.
//!
//! Exit codes: `0` success, `1` an oracle comparison failed, `2` bad
//! configuration or arguments, `3` numerical or output failure.

mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{ExperimentConfig, ExperimentKind};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "phaselab", version, about = "Relative-phase statistics of decaying, interfering boson modes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Random seed; overrides the config file.
    #[arg(long, global = true, env = "PHASELAB_SEED")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Points on the phase grid for marginals.
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Relative tolerance for co-maximal partitions.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition probability tables and their maxima.
    Stats,
    /// Monte Carlo detection histories.
    Trajectory,
    /// Check the sphere calculus against a truncated Fock-space computation.
    Oracle,
    /// Data behind one of the standard figures.
    Figure {
        #[arg(value_enum)]
        which: Figure,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Four-channel distribution at L = 40, ξ = π/2, versus n₁ and n₃.
    Fig2,
    /// Phase marginals after ten detections with tunneling.
    Fig4,
    /// As fig4 with an energy offset ε = δ/4.
    Fig5,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("oracle check failed: {0}")]
    OracleFailed(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::OracleFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InsufficientTruncation { .. } => {
                CliError::Config(e.to_string())
            }
            Error::Annihilated(_) | Error::BudgetExceeded { .. } | Error::NoDistinctPeak => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phaselab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if cli.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be ≥ 1".into()));
    }
    if let Some(g) = cli.grid {
        if g < 8 {
            return Err(CliError::Config(format!("--grid must be ≥ 8, got {g}")));
        }
    }
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::Config(format!("--tol must be ≥ 0, got {t}")));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| commands::dispatch(cli))
}
