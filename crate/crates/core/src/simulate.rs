//! Synthetic regression data and co-data scenarios.
//!
//! Coefficients: `beta_0 = v0 |t|`, `beta_j = (-1)^u (v^2 log(n)/sqrt(n) + v |t|)`
//! for `j <= p0` with `u ~ Bernoulli(bern)` and `t ~ N(0, 1)`, zero otherwise.
//! Covariates and noise are independent standard normals.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Task};
use crate::rng::substream;

const TAG_DATA: u64 = 0x51;
const TAG_CODATA: u64 = 0x52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub p0: usize,
    pub v0_sq: f64,
    pub v_sq: f64,
    pub bern: f64,
    pub seed: u64,
    pub task: Task,
}

impl SimSpec {
    pub fn new(n: usize, p: usize, p0: usize, seed: u64) -> Self {
        Self { n, p, p0, v0_sq: 0.5, v_sq: 0.75, bern: 0.4, seed, task: Task::Linear }
    }

    fn check(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(Error::InvalidArgument(format!("need n >= 2 and p >= 1, got n={} p={}", self.n, self.p)));
        }
        if self.p0 > self.p {
            return Err(Error::InvalidArgument(format!("p0 = {} exceeds p = {}", self.p0, self.p)));
        }
        if !(0.0..=1.0).contains(&self.bern) || self.v0_sq < 0.0 || self.v_sq < 0.0 {
            return Err(Error::InvalidArgument("invalid coefficient-generation constants".into()));
        }
        Ok(())
    }
}

/// How the co-data source relates to the true support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodataKind {
    /// No source; the model sees only the intercept column.
    InterceptOnly,
    /// Indicator of `count` covariates picked uniformly, ignoring the support.
    Random { count: usize },
    /// Indicator with `k_true` picks on the support and `k_false` off it.
    Binary { k_true: usize, k_false: usize },
    /// Indicator of the true support.
    Perfect,
}

/// Named presets for the main and appendix experiment grids.
pub fn scenario(name: &str) -> Option<CodataKind> {
    Some(match name {
        "main_G0" | "appendix_G0" => CodataKind::InterceptOnly,
        "main_G1" => CodataKind::Random { count: 100 },
        "main_G2" => CodataKind::Binary { k_true: 20, k_false: 80 },
        "main_G3" => CodataKind::Binary { k_true: 20, k_false: 10 },
        "main_G4" | "appendix_G3" => CodataKind::Perfect,
        "appendix_G1" => CodataKind::Random { count: 30 },
        "appendix_G2" => CodataKind::Binary { k_true: 20, k_false: 10 },
        _ => return None,
    })
}

pub const SCENARIO_NAMES: [&str; 9] = [
    "main_G0",
    "main_G1",
    "main_G2",
    "main_G3",
    "main_G4",
    "appendix_G0",
    "appendix_G1",
    "appendix_G2",
    "appendix_G3",
];

/// Design, response and the true coefficient vector (intercept first).
pub fn gen_data<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<(Dataset, DVector<f64>)> {
    spec.check()?;
    let (n, p) = (spec.n, spec.p);
    let mut beta = DVector::zeros(p + 1);
    let v0 = spec.v0_sq.sqrt();
    let v = spec.v_sq.sqrt();
    let floor = spec.v_sq * (n as f64).ln() / (n as f64).sqrt();
    beta[0] = v0 * rng.sample::<f64, _>(StandardNormal).abs();
    for j in 1..=spec.p0 {
        let t: f64 = rng.sample(StandardNormal);
        let sign = if rng.random::<f64>() < spec.bern { -1.0 } else { 1.0 };
        beta[j] = sign * (floor + v * t.abs());
    }
    let mut x = DMatrix::from_element(n, p + 1, 1.0);
    // fill row-major so the stream order is independent of nalgebra's layout
    for i in 0..n {
        for j in 1..=p {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let lin = &x * &beta;
    let y = DVector::from_fn(n, |i, _| {
        let latent = lin[i] + rng.sample::<f64, _>(StandardNormal);
        match spec.task {
            Task::Linear => latent,
            Task::Probit => (latent > 0.0) as u8 as f64,
        }
    });
    Ok((Dataset::new(y, x, Vec::new()), beta))
}

/// Co-data sources for a scenario (empty for intercept-only).
pub fn gen_codata<R: Rng + ?Sized>(
    kind: CodataKind,
    true_beta: &DVector<f64>,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    let p = true_beta.len() - 1;
    let support: Vec<usize> = (0..p).filter(|&j| true_beta[j + 1] != 0.0).collect();
    let null: Vec<usize> = (0..p).filter(|&j| true_beta[j + 1] == 0.0).collect();
    let mut z = DMatrix::zeros(p, 1);
    match kind {
        CodataKind::InterceptOnly => return Ok(Vec::new()),
        CodataKind::Perfect => {
            for &j in &support {
                z[(j, 0)] = 1.0;
            }
        }
        CodataKind::Random { count } => {
            if count > p {
                return Err(Error::InvalidArgument(format!("cannot pick {count} of {p} covariates")));
            }
            for j in sample_indices(rng, p, count) {
                z[(j, 0)] = 1.0;
            }
        }
        CodataKind::Binary { k_true, k_false } => {
            if k_true > support.len() || k_false > null.len() {
                return Err(Error::InvalidArgument(format!(
                    "scenario needs {k_true} signals and {k_false} nulls, have {} and {}",
                    support.len(),
                    null.len()
                )));
            }
            for i in sample_indices(rng, support.len(), k_true) {
                z[(support[i], 0)] = 1.0;
            }
            for i in sample_indices(rng, null.len(), k_false) {
                z[(null[i], 0)] = 1.0;
            }
        }
    }
    Ok(vec![z])
}

/// Data plus co-data for one replicate, each drawn from its own seeded stream.
pub fn simulate(spec: &SimSpec, kind: CodataKind) -> Result<(Dataset, DVector<f64>)> {
    let (mut data, beta) = gen_data(spec, &mut substream(spec.seed, TAG_DATA, 0, 0))?;
    data.codata = gen_codata(kind, &beta, &mut substream(spec.seed, TAG_CODATA, 0, 0))?;
    Ok((data, beta))
}
