//! Command-line front end: runs instances and parameter sweeps from JSON
//! configs and writes bounds, reports and plot-ready data files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::Units;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Failure(_) | Self::Io(_) => 1,
        }
    }
}

impl From<relent::Error> for CliError {
    fn from(e: relent::Error) -> Self {
        match e {
            relent::Error::Infeasible(m) => Self::Infeasible(m),
            other => Self::Failure(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "relent", version, about = "Certified bounds on constrained quantum relative entropy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Units of reported values; overrides the config.
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    /// Seed for random inputs; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Convergence study of the fixed-pair bounds against the exact value.
    FixedPair,
    /// Refine both relaxations of a problem until the gap target is met.
    Solve,
    /// Key-rate lower bounds over the isotropic noise parameter.
    QkdSweep,
    /// Entanglement-assisted capacity of amplitude damping over the damping parameter.
    CapacitySweep,
    /// Relative entropy of entanglement of isotropic two-qubit states.
    ReeSweep,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = (|| -> Result<i32, CliError> {
        let config = cli
            .common
            .config
            .as_deref()
            .ok_or_else(|| CliError::Config("--config: required".into()))?;
        if let Some(j) = cli.common.jobs {
            if j == 0 {
                return Err(CliError::Config("--jobs: must be at least 1".into()));
            }
        }
        std::fs::create_dir_all(&cli.common.out)?;
        match cli.command {
            Command::FixedPair => commands::fixed_pair(config, &cli.common),
            Command::Solve => commands::solve(config, &cli.common),
            Command::QkdSweep => commands::qkd_sweep(config, &cli.common),
            Command::CapacitySweep => commands::capacity_sweep(config, &cli.common),
            Command::ReeSweep => commands::ree_sweep(config, &cli.common),
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("relent: {e}");
            e.exit_code()
        }
    }
}
