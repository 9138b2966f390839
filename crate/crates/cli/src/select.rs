use std::path::PathBuf;

use clap::{Args, ValueEnum};
use infhs::selection::{default_grid, dss_select, threshold_select, DssOptions, SelectionMethod, SelectionResult};
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::fit::FitReport;
use crate::io::{ensure_dir, read_dataset, read_json, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Threshold,
    Dss,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// fit.json written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Data directory of the fit (needed for dss).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Threshold)]
    pub method: Method,
    /// Select covariates whose inclusion score exceeds this value.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Comma-separated penalty grid; defaults to 50 log-spaced values below lambda_max.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Leave the intercept out of the penalty.
    #[arg(long)]
    pub free_intercept: bool,
}

#[derive(Debug, Serialize)]
struct SelectionFile {
    method: SelectionMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dss_lambda: Option<f64>,
    scores: Vec<f64>,
    selected: Vec<bool>,
    /// 1-based indices of the selected covariates.
    support: Vec<usize>,
}

pub fn run(args: &SelectArgs) -> Result<()> {
    let fit: FitReport = read_json(&args.fit)?;
    if fit.inclusion.len() != fit.p || fit.beta_mean.len() != fit.p + 1 {
        return Err(CliError::parse(&args.fit, "coefficient and score lengths disagree with p"));
    }
    let scores = fit.inclusion.clone();
    let (result, threshold): (SelectionResult, _) = match args.method {
        Method::Threshold => {
            if !(0.0..=1.0).contains(&args.threshold) {
                return Err(CliError::BadFlag(format!("--threshold {} is outside [0, 1]", args.threshold)));
            }
            let selected = threshold_select(&scores, args.threshold);
            let r = SelectionResult { scores, selected, method: SelectionMethod::Threshold, dss_lambda: None };
            (r, Some(args.threshold))
        }
        Method::Dss => {
            let dir = args.data.as_ref().ok_or_else(|| CliError::BadFlag("--method dss needs --data".into()))?;
            let mut data = read_dataset(dir)?;
            if fit.standardized {
                data = data.standardized(true);
            }
            if data.p() != fit.p || data.n() != fit.n {
                return Err(CliError::BadFlag(format!(
                    "data is {}x{} but the fit was {}x{}",
                    data.n(),
                    data.p(),
                    fit.n,
                    fit.p
                )));
            }
            let beta_hat = DVector::from_vec(fit.beta_mean.clone());
            let opts = DssOptions { penalize_intercept: !args.free_intercept, ..DssOptions::default() };
            let grid = match &args.grid {
                Some(g) => g.clone(),
                None => default_grid(&data.x, &beta_hat, &opts)?,
            };
            (dss_select(&data.x, &beta_hat, scores, &grid, args.folds, &opts)?, None)
        }
    };
    let support = result.selected.iter().enumerate().filter(|(_, &s)| s).map(|(j, _)| j + 1).collect::<Vec<_>>();
    let count = support.len();
    let file = SelectionFile {
        method: result.method,
        threshold,
        dss_lambda: result.dss_lambda,
        scores: result.scores,
        selected: result.selected,
        support,
    };
    ensure_dir(&args.out)?;
    write_json(&args.out.join("selection.json"), &file)?;
    println!("selected {count} of {} covariates", fit.p);
    Ok(())
}
