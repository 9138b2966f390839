use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use infhs::gibbs::{run_gibbs, summarize, FitSummary, GibbsConfig};
use infhs::vb::{run_cavi_linear, run_cavi_probit, VBConfig, VBFit};
use infhs::{Dataset, Hyperparameters, PosteriorDraws, Task};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Overrides};
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, read_dataset, write_json, write_table};
use crate::TaskArg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Vb,
    Gibbs,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Vb => "vb",
            Engine::Gibbs => "gibbs",
        }
    }
}

/// Flags shared by `fit` and `benchmark`.
#[derive(Debug, Args)]
pub struct EngineFlags {
    /// JSON file with `hyper`, `gibbs` and `vb` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gibbs sweeps.
    #[arg(long, visible_alias = "B")]
    pub iterations: Option<usize>,
    /// Gibbs burn-in sweeps.
    #[arg(long, visible_alias = "bn")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// VB stopping tolerance on the bound.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl EngineFlags {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            eps: self.eps,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory holding y.csv, X.csv and optional Z_1.csv, Z_2.csv, ...
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Vb)]
    pub engine: Engine,
    #[arg(long, value_enum, default_value_t = TaskArg::Linear)]
    pub task: TaskArg,
    /// Centre and scale the covariates and non-binary co-data columns.
    #[arg(long)]
    pub standardize: bool,
    /// Also write every retained Gibbs state to draws.csv.
    #[arg(long)]
    pub save_draws: bool,
    #[command(flatten)]
    pub engine_flags: EngineFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbReport {
    pub config: VBConfig,
    pub iterations: usize,
    pub converged: bool,
    pub elbo: f64,
    pub a_star: Vec<f64>,
    pub b_star: Vec<f64>,
    pub c_star: Vec<f64>,
    pub d_star: Vec<f64>,
    pub a0_star: f64,
    pub k0_star: f64,
    /// Rows of the `q(gamma)` scale matrix.
    pub sigma_gamma: Vec<Vec<f64>>,
    pub e_star: Vec<f64>,
    pub f_star: Vec<f64>,
    pub g_star: f64,
    pub h_star: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    pub config: GibbsConfig,
    pub retained: usize,
    pub summary: FitSummary,
}

/// Contents of fit.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub engine: Engine,
    pub task: Task,
    pub standardized: bool,
    pub n: usize,
    pub p: usize,
    /// Posterior mean of `beta`, intercept first.
    pub beta_mean: Vec<f64>,
    pub beta_sd: Vec<f64>,
    /// Posterior mean of `lambda_j^2 / (1 + lambda_j^2)`.
    pub inclusion: Vec<f64>,
    pub gamma_mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vb: Option<VbReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gibbs: Option<GibbsReport>,
}

pub fn fit_vb(data: &Dataset, hyper: &Hyperparameters, task: Task, cfg: &VBConfig) -> Result<(FitReport, VBFit)> {
    let fit = match task {
        Task::Linear => run_cavi_linear(data, hyper, cfg)?,
        Task::Probit => run_cavi_probit(data, hyper, cfg)?,
    };
    let s = &fit.state;
    let vb = VbReport {
        config: *cfg,
        iterations: fit.elbo_trace.len(),
        converged: fit.converged,
        elbo: fit.elbo_trace.last().copied().unwrap_or(f64::NAN),
        a_star: s.lambda_params.iter().map(|p| p.a_star).collect(),
        b_star: s.lambda_params.iter().map(|p| p.b_star).collect(),
        c_star: s.lambda_params.iter().map(|p| p.c_star).collect(),
        d_star: s.d_star.iter().copied().collect(),
        a0_star: s.a0_star,
        k0_star: s.k0_star,
        sigma_gamma: s.sigma_gamma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        e_star: s.e_star.iter().copied().collect(),
        f_star: s.f_star.iter().copied().collect(),
        g_star: s.g_star,
        h_star: s.h_star,
        l_star: (task == Task::Linear).then_some(s.l_star),
    };
    let report = FitReport {
        engine: Engine::Vb,
        task,
        standardized: false,
        n: data.n(),
        p: data.p(),
        beta_mean: s.mu_beta.iter().copied().collect(),
        beta_sd: s.beta_sd().iter().copied().collect(),
        inclusion: s.inclusion_probs()?,
        gamma_mean: s.mu_gamma.iter().copied().collect(),
        vb: Some(vb),
        gibbs: None,
    };
    Ok((report, fit))
}

pub fn fit_gibbs(data: &Dataset, hyper: &Hyperparameters, cfg: &GibbsConfig) -> Result<(FitReport, PosteriorDraws)> {
    let draws = run_gibbs(data, hyper, cfg)?;
    let summary = summarize(&draws)?;
    let report = FitReport {
        engine: Engine::Gibbs,
        task: Task::Linear,
        standardized: false,
        n: data.n(),
        p: data.p(),
        beta_mean: summary.beta_mean.clone(),
        beta_sd: summary.beta_sd.clone(),
        inclusion: summary.inclusion.clone(),
        gamma_mean: summary.gamma_mean.clone(),
        vb: None,
        gibbs: Some(GibbsReport { config: *cfg, retained: draws.draws.len(), summary }),
    };
    Ok((report, draws))
}

pub fn check_combination(engine: Engine, task: Task) -> Result<()> {
    if engine == Engine::Gibbs && task == Task::Probit {
        return Err(CliError::UnsupportedCombination("the Gibbs sampler fits linear models only; use --engine vb".into()));
    }
    Ok(())
}

pub fn run(args: &FitArgs) -> Result<()> {
    let task: Task = args.task.into();
    check_combination(args.engine, task)?;
    if args.save_draws && args.engine != Engine::Gibbs {
        return Err(CliError::BadFlag("--save-draws needs --engine gibbs".into()));
    }
    let config = Config::load(args.engine_flags.config.as_deref())?;
    let mut data = read_dataset(&args.data)?;
    if args.standardize {
        data = data.standardized(true);
    }
    let hyper = config.hyper(data.num_groups());
    let overrides = args.engine_flags.overrides();
    ensure_dir(&args.out)?;
    let mut report = match args.engine {
        Engine::Vb => {
            let (report, fit) = fit_vb(&data, &hyper, task, &config.vb(&overrides))?;
            write_elbo(&args.out.join("elbo.csv"), &fit)?;
            report
        }
        Engine::Gibbs => {
            let (report, draws) = fit_gibbs(&data, &hyper, &config.gibbs(&overrides))?;
            if args.save_draws {
                write_draws(&args.out.join("draws.csv"), &draws)?;
            }
            report
        }
    };
    report.standardized = args.standardize;
    write_json(&args.out.join("fit.json"), &report)?;
    println!("{} fit of n={} p={} written to {}", args.engine.name(), data.n(), data.p(), args.out.display());
    Ok(())
}

fn write_elbo(path: &Path, fit: &VBFit) -> Result<()> {
    let rows: Vec<Vec<String>> = fit
        .terms
        .iter()
        .enumerate()
        .map(|(k, t)| vec![(k + 1).to_string(), t.total.to_string(), t.log_s_sum.to_string(), t.log_k_sum.to_string()])
        .collect();
    write_table(path, &["iteration", "elbo", "log_s_sum", "log_k_sum"], &rows)
}

fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let Some(first) = draws.draws.first() else {
        return write_table(path, &[], &[]);
    };
    let mut header: Vec<String> = (0..first.beta.len()).map(|j| format!("beta_{j}")).collect();
    header.extend(["sigma_sq", "tau_sq", "zeta", "lambda0_sq", "psi0"].map(String::from));
    header.extend((1..=first.lambda.len()).map(|j| format!("lambda_{j}")));
    header.extend((1..=first.phi_sq.len()).map(|j| format!("phi_sq_{j}")));
    header.extend((0..first.gamma.len()).map(|k| format!("gamma_{k}")));
    header.extend((1..=first.kappa_sq.len()).map(|d| format!("kappa_sq_{d}")));
    let rows: Vec<Vec<String>> = draws
        .draws
        .iter()
        .map(|s| {
            s.beta
                .iter()
                .chain([s.sigma_sq, s.tau_sq, s.zeta, s.lambda0_sq, s.psi0].iter())
                .chain(s.lambda.iter())
                .chain(s.phi_sq.iter())
                .chain(s.gamma.iter())
                .chain(s.kappa_sq.iter())
                .map(|v| v.to_string())
                .collect()
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, &rows)
}
