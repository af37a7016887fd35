//! Command line driver: mesh generation, the truncated-domain solve, and the
//! conforming/non-conforming error-bound experiments, reporting CSV and VTK.
//!
//! Exit codes: 0 success, 2 configuration error, 3 the energy minimization
//! hit its iteration budget, 4 a bound ordering was violated (always a bug).

mod config;
mod drivers;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "majorant", version, about = "Guaranteed error bounds for exterior-domain problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config; created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Process ladder entries sequentially. This is the only implemented
    /// mode; the flag is accepted so scripted invocations can state it.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ladder meshes as TETMESH files.
    Meshgen(RunArgs),
    /// Minimize the truncated-domain energy; emit summary and trace CSV.
    Solve(RunArgs),
    /// Compute guaranteed two-sided bounds; emit CSV and indicator VTK.
    Bounds(RunArgs),
    /// Run the fabricated non-conforming flux suite; emit the ordering CSV.
    Nonconforming(RunArgs),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NonConvergence,
    BoundViolation(String),
    Other(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence => 3,
            CliError::BoundViolation(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::NonConvergence => {
                write!(f, "energy minimization did not converge within the iteration budget")
            }
            CliError::BoundViolation(msg) => write!(f, "bound violation: {msg}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

fn run(args: &RunArgs, driver: fn(&RunConfig, &std::path::Path) -> Result<(), CliError>) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config).map_err(CliError::Config)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Other(anyhow::anyhow!("creating {}: {e}", out.display())))?;
    driver(&config, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Meshgen(args) => run(args, drivers::cmd_meshgen),
        Command::Solve(args) => run(args, drivers::cmd_solve),
        Command::Bounds(args) => run(args, drivers::cmd_bounds),
        Command::Nonconforming(args) => run(args, drivers::cmd_nonconforming),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("majorant: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
