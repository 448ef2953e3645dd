//! Batch front-end: `tree-carleman <command> --scenario <file> --out <dir>`.
//!
//! Exit codes: 0 pass, 1 I/O, 2 invalid input, 3 check failure.

mod commands;
mod error;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Output;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tree-carleman", version, about = "Carleman weights and inverse potentials on metric trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Construct and validate the weight family.
    Weights(Common),
    /// Synthesize boundary observations.
    Forward(Common),
    /// Ratio sweeps and the Carleman certificate.
    Carleman(Common),
    /// Reconstruct a potential from observations.
    Invert(Common),
    /// Empirical Lipschitz stability sweep.
    Stability(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (all cores when absent).
    #[arg(long)]
    threads: Option<usize>,
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(CliError::Invalid("--threads must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}"))),
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the parallel feature; --threads ignored");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Weights(common)
    | Command::Forward(common)
    | Command::Carleman(common)
    | Command::Invert(common)
    | Command::Stability(common)) = &cli.command;
    configure_threads(common.threads)?;
    let loaded = scenario::load(&common.scenario)?;
    let out = Output::new(&common.out, &loaded.sha256)?;
    match &cli.command {
        Command::Weights(_) => commands::weights(&loaded, &out),
        Command::Forward(c) => commands::forward(&loaded, &out, c.seed),
        Command::Carleman(_) => commands::carleman(&loaded, &out),
        Command::Invert(c) => commands::invert(&loaded, &out, c.seed),
        Command::Stability(c) => commands::stability(&loaded, &out, c.seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report =
                serde_json::to_string(&e.report()).unwrap_or_else(|_| format!("{{\"message\":{:?}}}", e.to_string()));
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
