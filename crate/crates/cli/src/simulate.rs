use std::path::PathBuf;

use clap::Args;
use infhs::simulate::{scenario, simulate, SimSpec, SCENARIO_NAMES};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{write_dataset, write_json};
use crate::TaskArg;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory for y.csv, X.csv, Z_*.csv and truth.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Number of non-zero coefficients.
    #[arg(long, default_value_t = 30)]
    pub p0: usize,
    #[arg(long, default_value = "main_G0")]
    pub scenario: String,
    #[arg(long, value_enum, default_value_t = TaskArg::Linear)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct Truth<'a> {
    scenario: &'a str,
    spec: SimSpec,
    /// Intercept first.
    beta: Vec<f64>,
    /// 1-based indices of the non-zero covariates.
    support: Vec<usize>,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    if args.p0 > args.p {
        return Err(CliError::BadFlag(format!("--p0 {} exceeds --p {}", args.p0, args.p)));
    }
    let kind = scenario(&args.scenario).ok_or_else(|| {
        CliError::BadFlag(format!("unknown scenario '{}', expected one of {}", args.scenario, SCENARIO_NAMES.join(", ")))
    })?;
    let mut spec = SimSpec::new(args.n, args.p, args.p0, args.seed);
    spec.task = args.task.into();
    let (data, beta) = simulate(&spec, kind)?;
    write_dataset(&args.out, &data)?;
    let truth = Truth {
        scenario: &args.scenario,
        spec,
        beta: beta.iter().copied().collect(),
        support: (1..beta.len()).filter(|&j| beta[j] != 0.0).collect(),
    };
    write_json(&args.out.join("truth.json"), &truth)?;
    println!("simulated n={} p={} ({}) into {}", args.n, args.p, args.scenario, args.out.display());
    Ok(())
}
