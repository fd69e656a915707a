//! `cvmdi`: key rates, security thresholds, attack-plane scans and Monte Carlo
//! runs from the command line.
//!
//! Exit status is 0 on success, 2 for invalid or infeasible parameters and 1
//! for anything else.

mod commands;
mod config;
mod output;
mod units;

use clap::{Parser, Subcommand};
use config::{ConfigFile, RateArgs, RegionArgs, ScanArgs, SimulateArgs, ThresholdArgs};
use cvmdi_core::attack::AttackError;
use cvmdi_core::montecarlo::MonteCarloError;
use cvmdi_core::rate::RateError;
use cvmdi_core::threshold::ThresholdError;
use output::Format;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

/// A parameter problem the user can fix; exits with status 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Debug, Parser)]
#[command(name = "cvmdi", version, about = "CV-MDI QKD key rates, thresholds and simulations")]
struct Cli {
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; stdout when neither this nor an output directory is set.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Directory for outputs named after the subcommand.
    #[arg(long, global = true, env = "CVMDI_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Key rate for given links and attack.
    Rate(RateArgs),
    /// Bob's maximum distance from the relay versus Alice's.
    Threshold(ThresholdArgs),
    /// Grid scans of the correlation or transmissivity plane.
    Scan(ScanArgs),
    /// Simulate the protocol and run the estimation pipeline.
    Simulate(SimulateArgs),
    /// Classify the correlation plane of Eve's reservoir.
    AttackRegion(RegionArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let format = cli.format.or(file.format).unwrap_or_default();
    let out = match cli.command {
        Command::Rate(a) => commands::rate(a.overlay(file.rate))?,
        Command::Threshold(a) => commands::threshold(a.overlay(file.threshold))?,
        Command::Scan(a) => commands::scan(a.overlay(file.scan))?,
        Command::Simulate(a) => commands::simulate_cmd(a.overlay(file.simulate))?,
        Command::AttackRegion(a) => commands::attack_region(a.overlay(file.attack_region))?,
    };
    let output = cli.output.or(file.output);
    let path = output::destination(output.as_deref(), cli.output_dir.as_deref(), out.command, format);
    output::write(&out.render(format)?, path.as_deref())
}

fn rate_is_invalid(e: &RateError) -> bool {
    !matches!(e, RateError::Gaussian(_))
}

fn is_invalid(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        if cause.is::<Invalid>() {
            return true;
        }
        if let Some(e) = cause.downcast_ref::<RateError>() {
            return rate_is_invalid(e);
        }
        if let Some(e) = cause.downcast_ref::<AttackError>() {
            return !matches!(e, AttackError::Gaussian(_));
        }
        if let Some(e) = cause.downcast_ref::<ThresholdError>() {
            return match e {
                ThresholdError::Rate(r) => rate_is_invalid(r),
                _ => true,
            };
        }
        if let Some(e) = cause.downcast_ref::<MonteCarloError>() {
            return match e {
                MonteCarloError::Rate(r) => rate_is_invalid(r),
                MonteCarloError::Gaussian(_) => false,
                // the reconstructed data cannot support a key at these settings
                _ => true,
            };
        }
        false
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_invalid(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
