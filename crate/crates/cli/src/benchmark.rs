//! Replicated simulate, fit and score runs across co-data scenarios.

use std::path::PathBuf;

use clap::Args;
use infhs::metrics::{auc, mse_beta};
use infhs::simulate::{scenario, simulate, SimSpec, SCENARIO_NAMES};
use infhs::Task;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::fit::{check_combination, fit_gibbs, fit_vb, Engine, EngineFlags, FitReport};
use crate::io::{ensure_dir, write_table};
use crate::TaskArg;

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated scenario names; `a..b` spans the preset list.
    #[arg(long, value_delimiter = ',', default_value = "main_G0..main_G4")]
    pub scenarios: Vec<String>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "vb")]
    pub engines: Vec<Engine>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    #[arg(long, default_value_t = 30)]
    pub p0: usize,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value_t = TaskArg::Linear)]
    pub task: TaskArg,
    #[command(flatten)]
    pub engine_flags: EngineFlags,
}

fn expand_scenarios(items: &[String]) -> Result<Vec<String>> {
    let position = |name: &str| {
        SCENARIO_NAMES
            .iter()
            .position(|s| *s == name)
            .ok_or_else(|| CliError::BadFlag(format!("unknown scenario '{name}'")))
    };
    let mut out = Vec::new();
    for item in items {
        match item.split_once("..") {
            Some((a, b)) => {
                let (i, j) = (position(a)?, position(b)?);
                if i > j {
                    return Err(CliError::BadFlag(format!("empty scenario range '{item}'")));
                }
                out.extend(SCENARIO_NAMES[i..=j].iter().map(|s| s.to_string()));
            }
            None => {
                position(item)?;
                out.push(item.clone());
            }
        }
    }
    Ok(out)
}

struct Replicate {
    fits: Vec<FitReport>,
    auc: Vec<f64>,
}

pub fn run(args: &BenchmarkArgs) -> Result<()> {
    if args.replicates == 0 {
        return Err(CliError::BadFlag("--replicates must be at least 1".into()));
    }
    if args.p0 == 0 || args.p0 >= args.p {
        return Err(CliError::BadFlag(format!("AUC needs 0 < --p0 < --p, got p0={} p={}", args.p0, args.p)));
    }
    if args.engines.is_empty() {
        return Err(CliError::BadFlag("--engines is empty".into()));
    }
    let task: Task = args.task.into();
    for &e in &args.engines {
        check_combination(e, task)?;
    }
    let scenarios = expand_scenarios(&args.scenarios)?;
    let config = Config::load(args.engine_flags.config.as_deref())?;
    let overrides = args.engine_flags.overrides();
    let base_seed = overrides.seed.or(config.gibbs.seed).unwrap_or(1);

    let jobs: Vec<(usize, usize)> =
        (0..scenarios.len()).flat_map(|s| (0..args.replicates).map(move |r| (s, r))).collect();
    // each replicate's data depends only on its seed, so every scenario sees the same draws
    let results: Vec<Replicate> = jobs
        .par_iter()
        .map(|&(s, r)| -> Result<Replicate> {
            let seed = base_seed.wrapping_add(r as u64);
            let mut spec = SimSpec::new(args.n, args.p, args.p0, seed);
            spec.task = task;
            let kind = scenario(&scenarios[s]).expect("names checked above");
            let (data, beta) = simulate(&spec, kind)?;
            let truth: Vec<bool> = beta.iter().skip(1).map(|&b| b != 0.0).collect();
            let hyper = config.hyper(data.num_groups());
            let mut fits = Vec::new();
            let mut aucs = Vec::new();
            for &engine in &args.engines {
                let report = match engine {
                    Engine::Vb => fit_vb(&data, &hyper, task, &config.vb(&overrides))?.0,
                    Engine::Gibbs => {
                        let mut cfg = config.gibbs(&overrides);
                        cfg.seed = seed;
                        fit_gibbs(&data, &hyper, &cfg)?.0
                    }
                };
                aucs.push(auc(&report.inclusion, &truth)?);
                fits.push(report);
            }
            Ok(Replicate { fits, auc: aucs })
        })
        .collect::<Result<_>>()?;

    ensure_dir(&args.out)?;
    let mut auc_rows = Vec::new();
    for (&(s, r), rep) in jobs.iter().zip(&results) {
        for (e, engine) in args.engines.iter().enumerate() {
            auc_rows.push(vec![scenarios[s].clone(), (r + 1).to_string(), engine.name().into(), rep.auc[e].to_string()]);
        }
    }
    write_table(&args.out.join("auc_by_scenario.csv"), &["scenario", "replicate", "engine", "auc"], &auc_rows)?;

    let gi = args.engines.iter().position(|&e| e == Engine::Gibbs);
    let vi = args.engines.iter().position(|&e| e == Engine::Vb);
    if let (Some(gi), Some(vi)) = (gi, vi) {
        let mut mse_rows = Vec::new();
        let mut sd_rows = Vec::new();
        for (&(s, r), rep) in jobs.iter().zip(&results) {
            let (g, v) = (&rep.fits[gi], &rep.fits[vi]);
            mse_rows.push(vec![
                scenarios[s].clone(),
                (r + 1).to_string(),
                mse_beta(&g.beta_mean, &v.beta_mean)?.to_string(),
            ]);
            for j in 0..g.beta_sd.len() {
                sd_rows.push(vec![
                    scenarios[s].clone(),
                    (r + 1).to_string(),
                    j.to_string(),
                    g.beta_sd[j].to_string(),
                    v.beta_sd[j].to_string(),
                ]);
            }
        }
        write_table(&args.out.join("gs_vs_vb_mse.csv"), &["scenario", "replicate", "mse_beta"], &mse_rows)?;
        write_table(
            &args.out.join("sd_comparison.csv"),
            &["scenario", "replicate", "coefficient", "sd_gibbs", "sd_vb"],
            &sd_rows,
        )?;
    }

    for name in &scenarios {
        for (e, engine) in args.engines.iter().enumerate() {
            let vals: Vec<f64> =
                jobs.iter().zip(&results).filter(|((s, _), _)| scenarios[*s] == *name).map(|(_, rep)| rep.auc[e]).collect();
            println!("{name} {}: mean AUC {:.4}", engine.name(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    Ok(())
}
