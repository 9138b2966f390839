//! Variable selection: inclusion scores, thresholding and the decoupled
//! shrinkage-and-selection (DSS) adaptive-lasso path.
//!
//! The DSS objective for a fitted coefficient vector `b` is
//! `(1/n) ||X b - X theta||^2 + lambda * sum_j w_j |theta_j|`, `w_j = 1/|b_j|`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PosteriorDraws;
use crate::vb::VBState;

/// Anything that yields one inclusion score per covariate.
pub trait InclusionScores {
    fn inclusion_probs(&self) -> Result<Vec<f64>>;
}

impl InclusionScores for PosteriorDraws {
    /// Draw average of `lambda_j^2 / (1 + lambda_j^2)`.
    fn inclusion_probs(&self) -> Result<Vec<f64>> {
        let first = self
            .draws
            .first()
            .ok_or_else(|| Error::InvalidArgument("no retained draws".into()))?;
        let p = first.lambda.len();
        let mut acc = vec![0.0; p];
        for d in &self.draws {
            for (a, &l) in acc.iter_mut().zip(d.lambda.iter()) {
                let l2 = l * l;
                *a += l2 / (1.0 + l2);
            }
        }
        let k = self.draws.len() as f64;
        Ok(acc.into_iter().map(|a| a / k).collect())
    }
}

impl InclusionScores for VBState {
    fn inclusion_probs(&self) -> Result<Vec<f64>> {
        VBState::inclusion_probs(self)
    }
}

pub fn inclusion_probs<F: InclusionScores + ?Sized>(fit: &F) -> Result<Vec<f64>> {
    fit.inclusion_probs()
}

/// `scores_j > t`.
pub fn threshold_select(scores: &[f64], t: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > t).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Threshold,
    Dss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub scores: Vec<f64>,
    pub selected: Vec<bool>,
    pub method: SelectionMethod,
    pub dss_lambda: Option<f64>,
}

impl SelectionResult {
    pub fn threshold(scores: Vec<f64>, t: f64) -> Self {
        let selected = threshold_select(&scores, t);
        Self { scores, selected, method: SelectionMethod::Threshold, dss_lambda: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DssOptions {
    /// Include `theta_0` in the penalty (the objective as written sums from 0).
    pub penalize_intercept: bool,
    /// Largest tolerated KKT violation.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl Default for DssOptions {
    fn default() -> Self {
        Self { penalize_intercept: true, kkt_tol: 1e-8, max_sweeps: 100_000 }
    }
}

/// Below this `|b_j|` the weight is infinite and `theta_j` is pinned at zero.
const WEIGHT_CUTOFF: f64 = 1e-12;

fn weights(beta_hat: &DVector<f64>, opts: &DssOptions) -> Vec<f64> {
    beta_hat
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            if j == 0 && !opts.penalize_intercept {
                0.0
            } else if b.abs() < WEIGHT_CUTOFF {
                f64::INFINITY
            } else {
                1.0 / b.abs()
            }
        })
        .collect()
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

struct Path<'a> {
    x: &'a DMatrix<f64>,
    target: DVector<f64>,
    w: Vec<f64>,
    col_sq: Vec<f64>,
    opts: DssOptions,
}

impl<'a> Path<'a> {
    fn new(x: &'a DMatrix<f64>, beta_hat: &DVector<f64>, opts: DssOptions) -> Result<Self> {
        if beta_hat.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient length {} vs {} design columns",
                beta_hat.len(),
                x.ncols()
            )));
        }
        if beta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("beta_hat"));
        }
        Ok(Self {
            x,
            target: x * beta_hat,
            w: weights(beta_hat, &opts),
            col_sq: x.column_iter().map(|c| c.norm_squared()).collect(),
            opts,
        })
    }

    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    /// `(2/n) x_j' r` for every column.
    fn gradient(&self, r: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(r) * (2.0 / self.n())
    }

    fn skip(&self, j: usize, free_only: bool) -> bool {
        self.col_sq[j] == 0.0 || self.w[j].is_infinite() || (free_only && self.w[j] > 0.0)
    }

    fn kkt_violation(&self, theta: &DVector<f64>, r: &DVector<f64>, lambda: f64, free_only: bool) -> f64 {
        let g = self.gradient(r);
        let mut worst: f64 = 0.0;
        for j in 0..theta.len() {
            if self.skip(j, free_only) {
                continue;
            }
            let pen = lambda * self.w[j];
            let v = if theta[j] != 0.0 { (g[j] - pen * theta[j].signum()).abs() } else { (g[j].abs() - pen).max(0.0) };
            worst = worst.max(v);
        }
        worst
    }

    /// Coordinate descent from `theta`; returns the minimizer at `lambda`.
    fn solve(&self, theta: DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        self.descend(theta, lambda, false)
    }

    /// With `free_only`, coordinates with a positive weight keep their value.
    fn descend(&self, mut theta: DVector<f64>, lambda: f64, free_only: bool) -> Result<DVector<f64>> {
        let n = self.n();
        let mut r = &self.target - self.x * &theta;
        for sweep in 1..=self.opts.max_sweeps {
            let mut max_change: f64 = 0.0;
            for j in 0..theta.len() {
                let cs = self.col_sq[j];
                let old = theta[j];
                let new = if self.col_sq[j] == 0.0 || (free_only && self.w[j] > 0.0) {
                    continue;
                } else if self.w[j].is_infinite() {
                    0.0
                } else {
                    let rho = self.x.column(j).dot(&r) + cs * old;
                    soft(rho, n * lambda * self.w[j] / 2.0) / cs
                };
                if new != old {
                    r.axpy(old - new, &self.x.column(j), 1.0);
                    theta[j] = new;
                    max_change = max_change.max((new - old).abs() * cs.sqrt());
                }
            }
            if max_change < 1e-13 * (1.0 + self.target.norm()) || sweep % 50 == 0 {
                if self.kkt_violation(&theta, &r, lambda, free_only) < self.opts.kkt_tol {
                    return Ok(theta);
                }
                // refresh the residual against drift before continuing
                r = &self.target - self.x * &theta;
            }
        }
        Err(Error::NonConvergence { sweeps: self.opts.max_sweeps })
    }

    /// Start of the path: unpenalized coordinates fitted, everything else zero.
    fn base(&self) -> Result<DVector<f64>> {
        let p = self.x.ncols();
        if self.w.iter().all(|&w| w > 0.0) {
            return Ok(DVector::zeros(p));
        }
        self.descend(DVector::zeros(p), 0.0, true)
    }

    fn lambda_max(&self) -> Result<f64> {
        let base = self.base()?;
        let r = &self.target - self.x * &base;
        let g = self.gradient(&r);
        Ok((0..g.len())
            .filter(|&j| self.w[j] > 0.0 && self.w[j].is_finite() && self.col_sq[j] > 0.0)
            .map(|j| g[j].abs() / self.w[j])
            .fold(0.0, f64::max))
    }
}

/// Smallest penalty at which every penalized coefficient is zero.
pub fn lambda_max(x: &DMatrix<f64>, beta_hat: &DVector<f64>, opts: &DssOptions) -> Result<f64> {
    Path::new(x, beta_hat, *opts)?.lambda_max()
}

/// `points` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn default_grid(x: &DMatrix<f64>, beta_hat: &DVector<f64>, opts: &DssOptions) -> Result<Vec<f64>> {
    log_grid(lambda_max(x, beta_hat, opts)?, 1e-4, 50)
}

pub fn log_grid(top: f64, ratio: f64, points: usize) -> Result<Vec<f64>> {
    if !(top > 0.0) || !(ratio > 0.0 && ratio < 1.0) || points == 0 {
        return Err(Error::InvalidArgument(format!("cannot build a grid from top={top}, ratio={ratio}")));
    }
    if points == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (points - 1) as f64;
    Ok((0..points).map(|i| top * (step * i as f64).exp()).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty penalty grid".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("penalties must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("penalty grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// Warm-started solutions along a strictly decreasing grid.
pub fn dss_path(
    x: &DMatrix<f64>,
    beta_hat: &DVector<f64>,
    grid: &[f64],
    opts: &DssOptions,
) -> Result<Vec<DVector<f64>>> {
    check_grid(grid)?;
    let path = Path::new(x, beta_hat, *opts)?;
    let mut theta = path.base()?;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        theta = path.solve(theta, lambda)?;
        out.push(theta.clone());
    }
    Ok(out)
}

/// Objective value at `theta`.
pub fn dss_objective(x: &DMatrix<f64>, beta_hat: &DVector<f64>, theta: &DVector<f64>, lambda: f64, opts: &DssOptions) -> f64 {
    let fit = (x * beta_hat - x * theta).norm_squared() / x.nrows() as f64;
    let pen: f64 = weights(beta_hat, opts)
        .iter()
        .zip(theta.iter())
        .map(|(&w, &t)| if t == 0.0 { 0.0 } else { w * t.abs() })
        .sum();
    fit + lambda * pen
}

#[derive(Debug, Clone, PartialEq)]
pub struct DssCv {
    pub lambda: f64,
    pub theta: DVector<f64>,
    /// Grid actually used (deduplicated, decreasing) and its mean CV errors.
    pub grid: Vec<f64>,
    pub cv_error: Vec<f64>,
}

/// K-fold cross-validation of the penalty; row `i` lands in fold `i % folds`.
/// The loss is the held-out squared distance between `X theta` and `X beta_hat`.
pub fn dss_cv(
    x: &DMatrix<f64>,
    beta_hat: &DVector<f64>,
    grid: &[f64],
    folds: usize,
    opts: &DssOptions,
) -> Result<DssCv> {
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!("need 2 <= folds <= n, got {folds}")));
    }
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    grid.dedup();
    check_grid(&grid)?;

    let per_fold: Vec<Result<Vec<f64>>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<usize> = (0..n).filter(|i| i % folds != k).collect();
            let test: Vec<usize> = (0..n).filter(|i| i % folds == k).collect();
            let xt = x.select_rows(&train);
            let xv = x.select_rows(&test);
            let truth = &xv * beta_hat;
            let path = dss_path(&xt, beta_hat, &grid, opts)?;
            Ok(path.iter().map(|th| (&xv * th - &truth).norm_squared() / test.len() as f64).collect())
        })
        .collect();
    let mut cv_error = vec![0.0; grid.len()];
    for r in per_fold {
        for (c, e) in cv_error.iter_mut().zip(r?) {
            *c += e / folds as f64;
        }
    }
    // strict comparison keeps the earliest (largest) penalty on ties
    let mut best = 0;
    for (i, &e) in cv_error.iter().enumerate() {
        if e < cv_error[best] {
            best = i;
        }
    }
    let full = dss_path(x, beta_hat, &grid[..=best], opts)?;
    Ok(DssCv { lambda: grid[best], theta: full[best].clone(), grid, cv_error })
}

/// CV-tuned DSS selection; `scores` are carried through unchanged.
pub fn dss_select(
    x: &DMatrix<f64>,
    beta_hat: &DVector<f64>,
    scores: Vec<f64>,
    grid: &[f64],
    folds: usize,
    opts: &DssOptions,
) -> Result<SelectionResult> {
    let cv = dss_cv(x, beta_hat, grid, folds, opts)?;
    let selected = cv.theta.iter().skip(1).map(|&t| t != 0.0).collect();
    Ok(SelectionResult { scores, selected, method: SelectionMethod::Dss, dss_lambda: Some(cv.lambda) })
}
