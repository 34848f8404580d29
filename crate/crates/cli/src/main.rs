use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patina_core::PatinaError;

mod commands;
mod manifest;
mod svg;

#[derive(Parser)]
#[command(name = "patina", version, about = "Copper patina growth under SO2: simulate, calibrate, validate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the corrosion model and write CSV, chart and manifest.
    Simulate(RunArgs),
    /// Fit diffusivities to measured thicknesses.
    Calibrate(CalibrateArgs),
    /// Check the mole balance of a run.
    Validate(RunArgs),
    /// Print observed orders of accuracy.
    Convergence(RunArgs),
}

#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// Configuration file (`key = value` with sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment CSV; selects time-series forcing.
    #[arg(long, conflicts_with_all = ["chamber", "cycles"])]
    pub env: Option<PathBuf>,
    /// Constant chamber forcing.
    #[arg(long, conflicts_with = "cycles")]
    pub chamber: bool,
    /// Wet/dry cycle forcing.
    #[arg(long)]
    pub cycles: bool,
    /// Output directory.
    #[arg(long, default_value = "patina-out")]
    pub out: PathBuf,
    /// Central instead of upwind advection differences.
    #[arg(long)]
    pub central_advection: bool,
    /// Initial consumed copper thickness (non-dimensional).
    #[arg(long)]
    pub seed_a: Option<f64>,
    /// Initial consumed cuprite thickness (non-dimensional).
    #[arg(long)]
    pub seed_b: Option<f64>,
    /// Simulated time span in hours.
    #[arg(long)]
    pub horizon_hours: Option<f64>,
}

#[derive(Args, Clone, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Measurements CSV (`time_hours,thickness_cm,std_cm`).
    #[arg(long)]
    pub measurements: PathBuf,
    /// Fit D_w and D_s as one parameter (default).
    #[arg(long, overrides_with = "no_tie_dw_ds")]
    pub tie_dw_ds: bool,
    /// Fit all four diffusivities independently.
    #[arg(long)]
    pub no_tie_dw_ds: bool,
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Optimizer budget exhausted; results were still written.
    Exhausted,
    /// A validation check failed.
    CheckFailed,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PatinaError>() {
        Some(PatinaError::Solver { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PATINA_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Calibrate(args) => commands::calibrate(&args),
        Command::Validate(args) => commands::validate(&args),
        Command::Convergence(args) => commands::convergence(&args),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Exhausted) => ExitCode::from(2),
        Ok(Outcome::CheckFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
