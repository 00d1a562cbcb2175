//! `freezer`: simulate, identify, validate, predict, run MPC and report.

mod commands;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freezer_core::Error;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Numerical(_) | Error::Estimation(_) | Error::Solver(_) => 3,
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "freezer", version, about = "Grey-box freezer identification and economic MPC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if needed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model kind (A-E).
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// PRBS experiment on a virtual freezer; writes raw.csv and data.csv.
    Simulate(commands::SimulateArgs),
    /// Maximum-likelihood fit; writes fit.json and fit.params.
    Identify(commands::IdentifyArgs),
    /// Residual ACF and deviance test of two nested fits.
    Validate(commands::ValidateArgs),
    /// k-step-ahead prediction errors of a fit.
    Predict(commands::PredictArgs),
    /// Closed-loop economic MPC run against a virtual freezer.
    Mpc(commands::MpcArgs),
    /// Consolidate MPC run directories into JSON and plot-data CSVs.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Identify(a) => commands::identify(a),
        Command::Validate(a) => commands::validate(a),
        Command::Predict(a) => commands::predict(a),
        Command::Mpc(a) => commands::mpc(a),
        Command::Report(a) => commands::report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
