mod benchmark;
mod config;
mod error;
mod fit;
mod io;
mod select;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use infhs::Task;

use crate::error::{CliError, Result};

/// Informative Horseshoe regression: simulate data, fit by Gibbs sampling or
/// variational Bayes, select covariates and run replicated benchmarks.
///
/// Exit codes: 0 success, 2 bad flag or input, 3 numerical failure, 4 I/O.
/// INFHS_THREADS caps the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "infhs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a dataset with co-data for one scenario.
    Simulate(simulate::SimulateArgs),
    /// Fit a dataset directory.
    Fit(fit::FitArgs),
    /// Turn a fit into a covariate selection.
    Select(select::SelectArgs),
    /// Replicated runs across scenarios.
    Benchmark(benchmark::BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Linear,
    Probit,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Linear => Task::Linear,
            TaskArg::Probit => Task::Probit,
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("INFHS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::BadFlag(format!("INFHS_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::BadFlag(format!("cannot start {threads} threads: {e}")))
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Fit(a) => fit::run(a),
        Command::Select(a) => select::run(a),
        Command::Benchmark(a) => benchmark::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
