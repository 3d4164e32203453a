//! Command-line orchestration for the synthetic growth-rate pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure. A failing command removes the artifacts it had partially
//! written.

mod artifacts;
mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use artifacts::ArtifactWriter;
use config::RunConfig;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl From<growthsim::Error> for CliError {
    fn from(e: growthsim::Error) -> Self {
        match e {
            growthsim::Error::Numeric(msg) => CliError::Numeric(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "growthsim",
    about = "Synthetic equity growth-rate pipelines: fit, calibrate, simulate, validate, portfolio, report",
    version
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "growthsim.toml")]
    config: PathBuf,
    /// Seed override (otherwise the config seed applies).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restrict the command to a single configured ticker.
    #[arg(long, global = true)]
    ticker: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fit the model and write model + descriptive-statistics JSON.
    Fit,
    /// Grid-search the jump hyperparameters.
    Calibrate,
    /// Generate a seeded path ensemble.
    Simulate,
    /// Evaluate the comparison generators against the training data.
    Validate,
    /// Fit a dependence model and generate coupled multi-asset ensembles.
    Portfolio,
    /// Consolidate artifacts into a markdown summary and plot CSVs.
    Report,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut out = ArtifactWriter::new(&cli.out)?;
    let only = cli.ticker.as_deref();
    let result = match cli.command {
        Command::Fit => commands::fit(&config, &mut out, only),
        Command::Calibrate => commands::calibrate(&config, &mut out, only),
        Command::Simulate => commands::simulate(&config, &mut out, only),
        Command::Validate => commands::validate(&config, &mut out, only),
        Command::Portfolio => commands::portfolio(&config, &mut out, only),
        Command::Report => report::report(&config, &mut out, only),
    };
    if result.is_err() {
        out.discard();
    }
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
