//! `scengen`: calibrate, simulate, backtest, validate, report.
//!
//! Exit codes: 0 success, 2 input error, 3 degenerate filter, 4 model-file
//! error, 5 validation failure, 1 anything else.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "scengen",
    version,
    about = "IR/FX scenario generation and VaR/ES backtesting"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    scenarios: Option<usize>,
    /// Extreme-event level in today-standard-deviations.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Factors that must breach the level for a day to be extreme.
    #[arg(long, global = true)]
    violations: Option<usize>,
    #[arg(long, global = true)]
    jump_rate: Option<f64>,
    #[arg(long, global = true)]
    confidence: Option<f64>,
    /// Model file (default `<out>/model.json`).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter the panel and write the model file.
    Calibrate,
    /// Simulate scenarios from the model file.
    Simulate,
    /// Rolling VaR/ES backtest over the panel.
    Backtest,
    /// Run the oracle property checks on the panel.
    Validate {
        /// Multiply the calibrated driver scale (fault injection).
        #[arg(long)]
        scale_fault: Option<f64>,
    },
    /// Historical vs simulated histograms per factor.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        scenarios: cli.scenarios,
        eta: cli.eta,
        violations: cli.violations,
        jump_rate: cli.jump_rate,
        confidence: cli.confidence,
        model: cli.model.clone(),
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if cli.threads == Some(0) {
        return Err(CliError::Input("--threads must be >= 1".into()));
    }
    match cli.command {
        Command::Calibrate => commands::cmd_calibrate(&cfg),
        Command::Simulate => commands::cmd_simulate(&cfg, cli.threads),
        Command::Backtest => commands::cmd_backtest(&cfg, cli.threads),
        Command::Validate { scale_fault } => commands::cmd_validate(&cfg, scale_fault, cli.threads),
        Command::Report => commands::cmd_report(&cfg, cli.threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
