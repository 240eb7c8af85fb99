//! Command-line front end for the deblurring toolkit.
//!
//! Four subcommands cover the experimental loop: `blur` produces a
//! degraded scene with provenance, `deblur` restores it with GMRES or
//! MINRES on the plain or flipped system, `spectrum` writes dense
//! eigenvalue data for analysis, and `verify` runs the library's
//! consistency checks. All outputs are deterministic given the same
//! configuration and seed.

pub mod blur;
pub mod cli;
pub mod config;
pub mod deblur;
pub mod pipeline;
pub mod spectrum;
pub mod verify_cmd;

use clap::Parser;

use cli::{Cli, Command};
use config::{CliError, ExperimentConfig};

/// Parses the environment and arguments, runs one command, and returns
/// the process exit code.
pub fn run() -> i32 {
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    // clap exits with code 2 on malformed invocations by itself
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Blur(args) => blur::run(&ExperimentConfig::resolve(args)?),
        Command::Deblur(args) => deblur::run(&ExperimentConfig::resolve(args)?),
        Command::Spectrum(args) => spectrum::run(&ExperimentConfig::resolve(args)?),
        Command::Verify => verify_cmd::run(),
    }
}

/// `FLIPBLUR_THREADS` caps worker parallelism for the dense assemblies;
/// unset means the rayon default.
fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FLIPBLUR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| {
            CliError::usage(format!(
                "FLIPBLUR_THREADS: must be a positive integer, got {raw:?}"
            ))
        })?;
    // a second build_global is harmless: the first pool wins
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}
