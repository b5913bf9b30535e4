//! `seprate`: run separation tests, rate sweeps, lower-bound constructions
//! and self-checks from the command line.

mod commands;
mod config;

use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use seprate_core::Execution;

use commands::{CheckArgs, LowerBoundArgs, SweepArgs, TestArgs};

#[derive(Parser, Debug)]
#[command(name = "seprate", version, about = "Testing a Gaussian mean against a convex null")]
struct Cli {
    /// Run Monte Carlo loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one observation and run a test on it (exit 0 accept, 3 reject).
    Test(TestArgs),
    /// Estimate the empirical separation along one axis and fit its slope.
    Sweep(SweepArgs),
    /// Evaluate a lower-bound construction.
    Lowerbound(LowerBoundArgs),
    /// Run a validation suite (exit 1 on any unexpected row).
    Check(CheckArgs),
}

/// Reads SEPRATE_THREADS and sizes the global pool.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SEPRATE_THREADS") else {
        return Ok(());
    };
    let threads: usize = match raw.trim().parse() {
        Ok(t) if t > 0 => t,
        _ => bail!("SEPRATE_THREADS must be a positive integer, got '{raw}'"),
    };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow::anyhow!("cannot build thread pool: {e}"))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Test(a) => commands::cmd_test(a),
        Command::Sweep(a) => commands::cmd_sweep(a, exec),
        Command::Lowerbound(a) => commands::cmd_lowerbound(a),
        Command::Check(a) => commands::cmd_check(a, exec),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("seprate: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("seprate: {e:#}");
            ExitCode::from(1)
        }
    }
}
