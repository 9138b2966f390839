//! Gaussian computations for `Sigma = (X'X + D)^-1` with diagonal `D`.
//!
//! When `p + 1` exceeds `n` everything is routed through the `n x n` matrix
//! `K = I_n + X D^-1 X'` (Woodbury identity), keeping the cost at `O(n^2 p)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Diagonal prior precision `D`, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagPrecision(pub DVector<f64>);

impl DiagPrecision {
    pub fn new(delta: DVector<f64>) -> Result<Self> {
        if delta.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::SingularSystem("prior precision must be positive and finite"));
        }
        Ok(Self(delta))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_dims(x: &DMatrix<f64>, delta: &DiagPrecision) -> Result<()> {
    if x.ncols() != delta.len() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns but the precision has {} entries",
            x.ncols(),
            delta.len()
        )));
    }
    Ok(())
}

/// Factorization of `K = I_n + X D^-1 X'` with `G = L^-1 X D^-1/2`.
#[derive(Debug, Clone)]
pub struct Woodbury {
    inv_delta: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    g: DMatrix<f64>,
    log_det_k: f64,
}

impl Woodbury {
    pub fn new(x: &DMatrix<f64>, delta: &DiagPrecision) -> Result<Self> {
        check_dims(x, delta)?;
        let n = x.nrows();
        let inv_delta = delta.0.map(|d| 1.0 / d);
        let mut xs = x.clone();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            col *= inv_delta[j].sqrt();
        }
        let mut k = &xs * xs.transpose();
        for i in 0..n {
            k[(i, i)] += 1.0;
        }
        let chol = Cholesky::new(k).ok_or(Error::SingularSystem("I + X D^-1 X'"))?;
        let l = chol.l();
        let log_det_k = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let g = l
            .solve_lower_triangular(&xs)
            .ok_or(Error::SingularSystem("triangular solve with chol(K)"))?;
        if !log_det_k.is_finite() {
            return Err(Error::SingularSystem("I + X D^-1 X'"));
        }
        Ok(Self { inv_delta, chol, g, log_det_k })
    }

    /// `diag(Sigma)`.
    pub fn diag(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.inv_delta.len(),
            self.g
                .column_iter()
                .zip(self.inv_delta.iter())
                .map(|(c, &id)| ((1.0 - c.norm_squared()) * id).max(f64::MIN_POSITIVE)),
        )
    }

    /// `Sigma * rhs`.
    pub fn mean(&self, x: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let dr = rhs.component_mul(&self.inv_delta);
        let w = self.chol.solve(&(x * &dr));
        dr - (x.tr_mul(&w)).component_mul(&self.inv_delta)
    }

    /// `Sigma X' w` using only matrix-vector products.
    pub fn mean_xt(&self, x: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
        let kw = self.chol.solve(w);
        x.tr_mul(&kw).component_mul(&self.inv_delta)
    }

    /// `tr(X Sigma X') = ||G||_F^2`.
    pub fn trace_xsx(&self) -> f64 {
        self.g.norm_squared()
    }

    /// `log |Sigma| = -sum log delta - log |K|`.
    pub fn logdet(&self) -> f64 {
        self.inv_delta.iter().map(|v| v.ln()).sum::<f64>() - self.log_det_k
    }
}

/// Either the Woodbury factorization or a dense Cholesky of the precision.
#[derive(Debug, Clone)]
pub enum PosteriorGaussian {
    Dense { chol: Cholesky<f64, Dyn>, sigma: DMatrix<f64>, xtx: DMatrix<f64> },
    Woodbury(Woodbury),
}

impl PosteriorGaussian {
    /// Dense when `p + 1 <= n`, Woodbury otherwise. `xtx` may pass a cached `X'X`.
    pub fn new(x: &DMatrix<f64>, xtx: Option<&DMatrix<f64>>, delta: &DiagPrecision) -> Result<Self> {
        check_dims(x, delta)?;
        if x.ncols() <= x.nrows() {
            let xtx = match xtx {
                Some(m) => m.clone(),
                None => x.tr_mul(x),
            };
            let mut a = xtx.clone();
            for j in 0..a.ncols() {
                a[(j, j)] += delta.0[j];
            }
            let chol = Cholesky::new(a).ok_or(Error::SingularSystem("X'X + D"))?;
            let sigma = chol.inverse();
            Ok(Self::Dense { chol, sigma, xtx })
        } else {
            Ok(Self::Woodbury(Woodbury::new(x, delta)?))
        }
    }

    pub fn diag(&self) -> DVector<f64> {
        match self {
            Self::Dense { sigma, .. } => sigma.diagonal(),
            Self::Woodbury(w) => w.diag(),
        }
    }

    pub fn mean(&self, x: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Dense { chol, .. } => chol.solve(rhs),
            Self::Woodbury(w) => w.mean(x, rhs),
        }
    }

    pub fn mean_xt(&self, x: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Dense { chol, .. } => chol.solve(&x.tr_mul(v)),
            Self::Woodbury(w) => w.mean_xt(x, v),
        }
    }

    pub fn trace_xsx(&self) -> f64 {
        match self {
            Self::Dense { sigma, xtx, .. } => sigma.component_mul(xtx).sum().max(0.0),
            Self::Woodbury(w) => w.trace_xsx(),
        }
    }

    pub fn logdet(&self) -> f64 {
        match self {
            Self::Dense { chol, .. } => -2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            Self::Woodbury(w) => w.logdet(),
        }
    }
}

pub fn woodbury_diag(x: &DMatrix<f64>, delta: &DiagPrecision) -> Result<DVector<f64>> {
    Ok(Woodbury::new(x, delta)?.diag())
}

pub fn woodbury_mean(x: &DMatrix<f64>, delta: &DiagPrecision, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != delta.len() {
        return Err(Error::DimensionMismatch("rhs length differs from precision".into()));
    }
    Ok(Woodbury::new(x, delta)?.mean(x, rhs))
}

/// `Sigma X' w` for an `n`-vector `w`.
pub fn woodbury_mean_xt(x: &DMatrix<f64>, delta: &DiagPrecision, w: &DVector<f64>) -> Result<DVector<f64>> {
    if w.len() != x.nrows() {
        return Err(Error::DimensionMismatch("w length differs from X rows".into()));
    }
    Ok(Woodbury::new(x, delta)?.mean_xt(x, w))
}

pub fn trace_xsx(x: &DMatrix<f64>, delta: &DiagPrecision) -> Result<f64> {
    Ok(Woodbury::new(x, delta)?.trace_xsx())
}

pub fn woodbury_logdet(x: &DMatrix<f64>, delta: &DiagPrecision) -> Result<f64> {
    Ok(Woodbury::new(x, delta)?.logdet())
}

fn std_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Cached quantities for repeated draws of `N(Sigma X'y, sigma^2 Sigma)`.
#[derive(Debug, Clone)]
pub struct BetaSampler {
    xtx: Option<DMatrix<f64>>,
    xty: DVector<f64>,
}

impl BetaSampler {
    /// Dense Cholesky when `p + 1 <= 2n`, the `O(n^2 p)` scheme otherwise.
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self::with_path(x, y, x.ncols() <= 2 * x.nrows())
    }

    pub fn with_path(x: &DMatrix<f64>, y: &DVector<f64>, dense: bool) -> Self {
        Self {
            xtx: dense.then(|| x.tr_mul(x)),
            xty: x.tr_mul(y),
        }
    }

    /// Replace the response while keeping the Gram matrix.
    pub fn set_response(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) {
        self.xty = x.tr_mul(y);
    }

    pub fn uses_dense_path(&self) -> bool {
        self.xtx.is_some()
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        delta: &DiagPrecision,
        sigma_sq: f64,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        check_dims(x, delta)?;
        let sigma = sigma_sq.sqrt();
        let p1 = x.ncols();
        if let Some(xtx) = &self.xtx {
            let mut a = xtx.clone();
            for j in 0..p1 {
                a[(j, j)] += delta.0[j];
            }
            let chol = Cholesky::new(a).ok_or(Error::SingularSystem("X'X + D"))?;
            let mean = chol.solve(&self.xty);
            let z = std_normals(p1, rng);
            let noise = chol
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .ok_or(Error::SingularSystem("triangular solve with chol(X'X + D)"))?;
            Ok(mean + noise * sigma)
        } else {
            let n = x.nrows();
            let inv_delta = delta.0.map(|d| 1.0 / d);
            // u ~ N(0, D^-1), e ~ N(0, I_n) in units of sigma
            let u = std_normals(p1, rng).component_mul(&inv_delta.map(f64::sqrt));
            let e = std_normals(n, rng);
            let v = x * &u + e;
            let mut xd = x.clone();
            for (j, mut col) in xd.column_iter_mut().enumerate() {
                col *= inv_delta[j];
            }
            let mut k = &xd * x.transpose();
            for i in 0..n {
                k[(i, i)] += 1.0;
            }
            let chol = Cholesky::new(k).ok_or(Error::SingularSystem("I + X D^-1 X'"))?;
            let w = chol.solve(&(y / sigma - v));
            let theta = u + xd.tr_mul(&w);
            Ok(theta * sigma)
        }
    }
}

/// Exact draw from `N(Sigma X'y, sigma^2 Sigma)` with `Sigma = (X'X + D)^-1`.
pub fn sample_beta_fc<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    delta: &DiagPrecision,
    sigma_sq: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    BetaSampler::new(x, y).sample(x, y, delta, sigma_sq, rng)
}
