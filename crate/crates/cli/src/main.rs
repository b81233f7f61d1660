//! `kwl` — command-line runner for the Kac walk lab.
//!
//! Subcommands: `simulate` (walker ensembles with mixing diagnostics),
//! `bound` (step-schedule evaluation), `verify` (property suites), and
//! `density` (grid-operator density evolution). Every run writes a manifest
//! with its full parameter map and output digests; re-running with the same
//! parameters and seed reproduces all CSV outputs byte for byte.

mod commands;
mod config;
mod manifest;
mod output;
mod svg;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

/// Exit status conventions: 0 success, 2 validation error, 3 property
/// violation, 4 resource abort.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Property(String),
    Resource(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Property(_) => 3,
            CliError::Resource(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Property(m) | CliError::Resource(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Resource(format!("i/o failure: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "kwl", version, about = "Kac walk laboratory", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a walker ensemble and record mixing diagnostics.
    Simulate(commands::simulate::SimulateArgs),
    /// Evaluate the total-variation bound and its step schedule.
    Bound(commands::bound::BoundArgs),
    /// Run a named property suite and write a report.
    Verify(commands::verify::VerifyArgs),
    /// Evolve a grid density under the kernel operator.
    Density(commands::density::DensityArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Bound(args) => commands::bound::run(args),
        Command::Verify(args) => commands::verify::run(args),
        Command::Density(args) => commands::density::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
