//! Shared data model: datasets, hyperparameters, sampler state and validation.
//!
//! Co-data sources are stored exactly as supplied (without an intercept). The
//! stacked co-data matrix used by both engines is `[1_p | Z_1 | ... | Z_D]`;
//! the leading ones column is grouped with the first source, so it shares that
//! source's `kappa^2`. With no sources at all the stack is just `1_p` and forms
//! a single group of width one.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Linear,
    Probit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Response, length n. Continuous for linear tasks, 0/1 for probit.
    pub y: DVector<f64>,
    /// Design matrix n x (p+1); column 0 is the intercept.
    pub x: DMatrix<f64>,
    /// Co-data sources Z_1..Z_D, each p x m_d, without intercept columns.
    pub codata: Vec<DMatrix<f64>>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, codata: Vec<DMatrix<f64>>) -> Self {
        Self { y, x, codata }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of covariates, intercept excluded.
    pub fn p(&self) -> usize {
        self.x.ncols().saturating_sub(1)
    }

    /// Column counts of the kappa groups of the stacked co-data matrix.
    pub fn group_sizes(&self) -> Vec<usize> {
        if self.codata.is_empty() {
            return vec![1];
        }
        self.codata
            .iter()
            .enumerate()
            .map(|(d, z)| if d == 0 { z.ncols() + 1 } else { z.ncols() })
            .collect()
    }

    pub fn num_groups(&self) -> usize {
        self.codata.len().max(1)
    }

    /// Total number of stacked co-data columns, intercept included.
    pub fn codata_columns(&self) -> usize {
        1 + self.codata.iter().map(|z| z.ncols()).sum::<usize>()
    }

    /// The stacked `p x M` co-data matrix with the ones column first.
    pub fn stacked_codata(&self) -> DMatrix<f64> {
        let p = self.p();
        let m = self.codata_columns();
        let mut z = DMatrix::zeros(p, m);
        z.column_mut(0).fill(1.0);
        let mut col = 1;
        for source in &self.codata {
            for k in 0..source.ncols() {
                z.column_mut(col).copy_from(&source.column(k));
                col += 1;
            }
        }
        z
    }

    pub fn group_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.group_sizes()
            .into_iter()
            .map(|m| {
                let r = start..start + m;
                start += m;
                r
            })
            .collect()
    }

    /// Copy with covariate columns 1..=p centred and scaled to unit variance,
    /// and, when `codata` is set, every non-binary co-data column likewise.
    /// Constant columns are left untouched.
    pub fn standardized(&self, codata: bool) -> Self {
        let mut out = self.clone();
        for j in 1..out.x.ncols() {
            standardize_column(out.x.column_mut(j));
        }
        if codata {
            for z in &mut out.codata {
                for k in 0..z.ncols() {
                    let is_binary = z.column(k).iter().all(|&v| v == 0.0 || v == 1.0);
                    if !is_binary {
                        standardize_column(z.column_mut(k));
                    }
                }
            }
        }
        out
    }
}

fn standardize_column<S>(mut col: nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    let len = col.len();
    if len < 2 {
        return;
    }
    let mean = col.mean();
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
    if var <= 0.0 {
        return;
    }
    let sd = var.sqrt();
    col.apply(|v| *v = (*v - mean) / sd);
}

/// Prior hyperparameters: `sigma^2 ~ IG(v, q)`, `kappa_d^2 ~ IG(a_d, b_d)` and
/// the Cauchy scale `s0_sq` of the local scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub v: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s0_sq: f64,
}

impl Hyperparameters {
    /// `(v, q) = (1, 10)`, `(a_d, b_d) = (1, 10)` for each group, `s0^2 = 1`.
    pub fn defaults(groups: usize) -> Self {
        Self {
            v: 1.0,
            q: 10.0,
            a: vec![1.0; groups],
            b: vec![10.0; groups],
            s0_sq: 1.0,
        }
    }

    pub fn defaults_for(dataset: &Dataset) -> Self {
        Self::defaults(dataset.num_groups())
    }
}

/// Check every structural invariant of `dataset` and `hyper` for `task`.
pub fn validate(dataset: &Dataset, hyper: &Hyperparameters, task: Task) -> Result<()> {
    let n = dataset.x.nrows();
    if dataset.x.ncols() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "design matrix needs an intercept and at least one covariate, got {} columns",
            dataset.x.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::DimensionMismatch(format!("need n >= 2, got {n}")));
    }
    if dataset.y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has length {} but X has {} rows",
            dataset.y.len(),
            n
        )));
    }
    if dataset.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("X"));
    }
    if dataset.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("y"));
    }
    if let Some((row, &value)) = dataset
        .x
        .column(0)
        .iter()
        .enumerate()
        .find(|(_, &v)| v != 1.0)
    {
        return Err(Error::MissingIntercept { row, value });
    }
    let p = dataset.p();
    for (d, z) in dataset.codata.iter().enumerate() {
        if z.nrows() != p {
            return Err(Error::DimensionMismatch(format!(
                "co-data source {} has {} rows, expected p = {}",
                d + 1,
                z.nrows(),
                p
            )));
        }
        if z.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "co-data source {} has no columns",
                d + 1
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("co-data"));
        }
    }

    let groups = dataset.num_groups();
    if hyper.a.len() != groups || hyper.b.len() != groups {
        return Err(Error::DimensionMismatch(format!(
            "expected {groups} (a, b) pairs, got {} and {}",
            hyper.a.len(),
            hyper.b.len()
        )));
    }
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidHyper(format!("{name} = {v}")))
        }
    };
    positive("v", hyper.v)?;
    positive("q", hyper.q)?;
    positive("s0_sq", hyper.s0_sq)?;
    for (d, (&a, &b)) in hyper.a.iter().zip(&hyper.b).enumerate() {
        positive(&format!("a[{d}]"), a)?;
        positive(&format!("b[{d}]"), b)?;
    }

    if task == Task::Probit {
        if let Some((index, &value)) = dataset
            .y
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 0.0 && v != 1.0)
        {
            return Err(Error::InvalidBinaryResponse { index, value });
        }
    }
    Ok(())
}

/// One full parameter state of the Gibbs sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub beta: DVector<f64>,
    pub sigma_sq: f64,
    pub tau_sq: f64,
    pub zeta: f64,
    pub lambda0_sq: f64,
    pub psi0: f64,
    /// Local scales lambda_1..lambda_p.
    pub lambda: DVector<f64>,
    pub phi_sq: DVector<f64>,
    pub gamma: DVector<f64>,
    pub kappa_sq: DVector<f64>,
}

impl GibbsState {
    pub fn scales_positive(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        pos(self.sigma_sq)
            && pos(self.tau_sq)
            && pos(self.zeta)
            && pos(self.lambda0_sq)
            && pos(self.psi0)
            && self.lambda.iter().all(|&v| pos(v))
            && self.phi_sq.iter().all(|&v| pos(v))
            && self.kappa_sq.iter().all(|&v| pos(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

/// Retained Gibbs states after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub draws: Vec<GibbsState>,
    pub meta: DrawsMeta,
}
