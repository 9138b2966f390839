//! Gibbs sampler for the linear model.
//!
//! One sweep updates, in order: `beta`; `lambda0^2`, `psi0`; each pair
//! `(lambda_j, phi_j^2)`; `gamma`; `kappa^2`; `tau^2`, `zeta`; `sigma^2`.
//! The local-scale block runs in parallel and every `(iteration, j)` pair reads
//! from its own keyed random stream, so draws do not depend on scheduling.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fast_gaussian::{BetaSampler, DiagPrecision};
use crate::g3p::{slice_update, LambdaFullConditionalParams, LambdaSampler};
use crate::model::{validate, Dataset, DrawsMeta, GibbsState, Hyperparameters, PosteriorDraws, Task};
use crate::rng::{inv_gamma, substream};

const TAG_INIT: u64 = 0x1;
const TAG_SWEEP: u64 = 0x2;
const TAG_LAMBDA: u64 = 0x3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Total number of sweeps `B`.
    pub iterations: usize,
    /// Burn-in `bn`.
    pub burn_in: usize,
    pub seed: u64,
    pub thin: usize,
}

impl GibbsConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self { iterations, burn_in, seed, thin: 1 }
    }

    fn check(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self::new(5000, 2500, 1)
    }
}

/// Diagnostic switches; all off for ordinary fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GibbsOptions {
    /// Only `beta` is updated; every scale keeps its initial value.
    pub freeze_scales: bool,
    /// `gamma` stays at zero (ordinary Horseshoe when `s0^2 = 1`).
    pub pin_gamma: bool,
}

/// Counters for the local-scale rejection sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplerStats {
    pub draws: u64,
    pub proposals: u64,
    pub stalls: u64,
}

#[derive(Debug, Clone)]
pub struct GibbsSampler {
    x: DMatrix<f64>,
    y: DVector<f64>,
    z: DMatrix<f64>,
    groups: Vec<Range<usize>>,
    hyper: Hyperparameters,
    beta_sampler: BetaSampler,
    state: GibbsState,
    seed: u64,
    iteration: u64,
    options: GibbsOptions,
    stats: SamplerStats,
}

impl GibbsSampler {
    pub fn new(dataset: &Dataset, hyper: &Hyperparameters, seed: u64, options: GibbsOptions) -> Result<Self> {
        validate(dataset, hyper, Task::Linear)?;
        let z = dataset.stacked_codata();
        let n = dataset.n();
        if z.ncols() > 10 * n {
            return Err(Error::TooManyCodataColumns { columns: z.ncols(), n });
        }
        let groups = dataset.group_ranges();
        let p = dataset.p();
        let mut rng = substream(seed, TAG_INIT, 0, 0);
        let state = GibbsState {
            beta: DVector::zeros(p + 1),
            sigma_sq: 1.0,
            tau_sq: 1.0,
            zeta: inv_gamma(0.5, 1.0, &mut rng),
            lambda0_sq: 1.0,
            psi0: inv_gamma(0.5, 1.0, &mut rng),
            lambda: DVector::from_element(p, 1.0),
            phi_sq: DVector::from_fn(p, |_, _| inv_gamma(0.5, 0.5, &mut rng)),
            gamma: DVector::zeros(z.ncols()),
            kappa_sq: DVector::from_fn(groups.len(), |d, _| inv_gamma(hyper.a[d], hyper.b[d], &mut rng)),
        };
        Ok(Self {
            beta_sampler: BetaSampler::new(&dataset.x, &dataset.y),
            x: dataset.x.clone(),
            y: dataset.y.clone(),
            z,
            groups,
            hyper: hyper.clone(),
            state,
            seed,
            iteration: 0,
            options,
            stats: SamplerStats::default(),
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    /// Replace the current state; lengths must match the dataset.
    pub fn set_state(&mut self, state: GibbsState) -> Result<()> {
        let ok = state.beta.len() == self.x.ncols()
            && state.lambda.len() == self.z.nrows()
            && state.phi_sq.len() == self.z.nrows()
            && state.gamma.len() == self.z.ncols()
            && state.kappa_sq.len() == self.groups.len();
        if !ok {
            return Err(Error::DimensionMismatch("state does not match the dataset".into()));
        }
        self.state = state;
        Ok(())
    }

    /// Replace the response, keeping the design and the current state.
    pub fn set_response(&mut self, y: DVector<f64>) -> Result<()> {
        if y.len() != self.x.nrows() {
            return Err(Error::DimensionMismatch("response length differs from X rows".into()));
        }
        self.beta_sampler.set_response(&self.x, &y);
        self.y = y;
        Ok(())
    }

    pub fn stats(&self) -> SamplerStats {
        self.stats
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One full sweep.
    pub fn step(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let mut rng = substream(self.seed, TAG_SWEEP, it, 0);
        self.update_beta(&mut rng)?;
        if !self.options.freeze_scales {
            self.update_lambda0(&mut rng);
            self.update_local_scales()?;
            if !self.options.pin_gamma {
                self.update_gamma(&mut rng)?;
            }
            self.update_kappa(&mut rng);
            self.update_tau(&mut rng);
            self.update_sigma(&mut rng);
        }
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        let s = &self.state;
        let what = if !s.scales_positive() {
            Some("scale parameter")
        } else if s.beta.iter().any(|v| !v.is_finite()) {
            Some("beta")
        } else if s.gamma.iter().any(|v| !v.is_finite()) {
            Some("gamma")
        } else {
            None
        };
        match what {
            Some(w) => Err(Error::NumericalOverflow { iteration: self.iteration as usize, what: w.into() }),
            None => Ok(()),
        }
    }

    fn update_beta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let s = &self.state;
        let p = s.lambda.len();
        let mut delta = DVector::zeros(p + 1);
        delta[0] = 1.0 / (s.tau_sq * s.lambda0_sq);
        for j in 0..p {
            delta[j + 1] = 1.0 / (s.tau_sq * s.lambda[j] * s.lambda[j]);
        }
        let delta = DiagPrecision::new(delta)?;
        self.state.beta = self.beta_sampler.sample(&self.x, &self.y, &delta, s.sigma_sq, rng)?;
        Ok(())
    }

    fn update_lambda0<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = &mut self.state;
        let b0 = s.beta[0];
        s.lambda0_sq = inv_gamma(1.0, 1.0 / s.psi0 + b0 * b0 / (2.0 * s.sigma_sq * s.tau_sq), rng);
        s.psi0 = inv_gamma(1.0, 1.0 + 1.0 / s.lambda0_sq, rng);
    }

    fn update_local_scales(&mut self) -> Result<()> {
        let s = &self.state;
        let mu = &self.z * &s.gamma;
        let s0 = self.hyper.s0_sq;
        let (seed, it) = (self.seed, self.iteration);
        let scale = 2.0 * s.sigma_sq * s.tau_sq;
        let results: Vec<Result<(f64, f64, u64, bool)>> = (0..s.lambda.len())
            .into_par_iter()
            .map(|j| {
                let mut rng = substream(seed, TAG_LAMBDA, it, j as u64);
                let bj = s.beta[j + 1];
                let phi = s.phi_sq[j];
                let params = LambdaFullConditionalParams::new(
                    bj * bj / scale,
                    1.0 / (2.0 * s0 * phi),
                    mu[j] / (s0 * phi),
                );
                let (lambda, used, stalled) = match LambdaSampler::new(&params)?.sample(&mut rng) {
                    Ok((x, used)) => (x, used, false),
                    Err(Error::AcceptanceStall { proposals }) => {
                        (slice_update(&params, s.lambda[j], &mut rng)?, proposals, true)
                    }
                    Err(e) => return Err(e),
                };
                let dev = lambda - mu[j];
                let phi_sq = inv_gamma(1.0, 0.5 + dev * dev / (2.0 * s0), &mut rng);
                Ok((lambda, phi_sq, used, stalled))
            })
            .collect();
        for (j, r) in results.into_iter().enumerate() {
            let (lambda, phi_sq, used, stalled) = r?;
            self.state.lambda[j] = lambda;
            self.state.phi_sq[j] = phi_sq;
            self.stats.draws += 1;
            self.stats.proposals += used;
            self.stats.stalls += stalled as u64;
        }
        Ok(())
    }

    fn update_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let s = &self.state;
        let m = self.z.ncols();
        let s0 = self.hyper.s0_sq;
        let w = s.phi_sq.map(|v| 1.0 / v);
        let mut zw = self.z.clone();
        for (j, mut row) in zw.row_iter_mut().enumerate() {
            row *= w[j];
        }
        let mut prec = zw.tr_mul(&self.z);
        for (d, r) in self.groups.iter().enumerate() {
            for k in r.clone() {
                prec[(k, k)] += s0 / s.kappa_sq[d];
            }
        }
        let rhs = zw.tr_mul(&s.lambda);
        let chol = Cholesky::new(prec).ok_or(Error::SingularSystem("gamma precision"))?;
        let mean = chol.solve(&rhs);
        let zn = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&zn)
            .ok_or(Error::SingularSystem("gamma precision"))?;
        self.state.gamma = mean + noise * s0.sqrt();
        Ok(())
    }

    fn update_kappa<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (d, r) in self.groups.iter().enumerate() {
            let g = self.state.gamma.rows(r.start, r.len()).norm_squared();
            let shape = self.hyper.a[d] + r.len() as f64 / 2.0;
            self.state.kappa_sq[d] = inv_gamma(shape, self.hyper.b[d] + g / 2.0, rng);
        }
    }

    fn weighted_beta_sq(&self) -> f64 {
        let s = &self.state;
        let mut acc = s.beta[0] * s.beta[0] / s.lambda0_sq;
        for j in 0..s.lambda.len() {
            let b = s.beta[j + 1];
            acc += b * b / (s.lambda[j] * s.lambda[j]);
        }
        acc
    }

    fn update_tau<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let p = self.state.lambda.len() as f64;
        let wb = self.weighted_beta_sq();
        let s = &mut self.state;
        s.tau_sq = inv_gamma(p / 2.0 + 1.0, 1.0 / s.zeta + wb / (2.0 * s.sigma_sq), rng);
        s.zeta = inv_gamma(1.0, 1.0 + 1.0 / s.tau_sq, rng);
    }

    fn update_sigma<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.x.nrows() as f64;
        let p = self.state.lambda.len() as f64;
        let wb = self.weighted_beta_sq();
        let rss = (&self.y - &self.x * &self.state.beta).norm_squared();
        let s = &mut self.state;
        let shape = self.hyper.v + (n + p + 1.0) / 2.0;
        s.sigma_sq = inv_gamma(shape, self.hyper.q + rss / 2.0 + wb / (2.0 * s.tau_sq), rng);
    }
}

/// Run the sampler and keep every `thin`-th state after burn-in.
pub fn run_gibbs(dataset: &Dataset, hyper: &Hyperparameters, config: &GibbsConfig) -> Result<PosteriorDraws> {
    run_gibbs_with(dataset, hyper, config, GibbsOptions::default(), None)
}

/// [`run_gibbs`] with diagnostic options and an optional starting state.
pub fn run_gibbs_with(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    options: GibbsOptions,
    init: Option<GibbsState>,
) -> Result<PosteriorDraws> {
    config.check()?;
    let mut sampler = GibbsSampler::new(dataset, hyper, config.seed, options)?;
    if let Some(s) = init {
        sampler.set_state(s)?;
    }
    let mut draws = Vec::with_capacity((config.iterations - config.burn_in) / config.thin);
    for t in 1..=config.iterations {
        sampler.step()?;
        if t > config.burn_in && (t - config.burn_in).is_multiple_of(config.thin) {
            draws.push(sampler.state().clone());
        }
    }
    Ok(PosteriorDraws {
        draws,
        meta: DrawsMeta {
            iterations: config.iterations,
            burn_in: config.burn_in,
            thin: config.thin,
            seed: config.seed,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub beta_mean: Vec<f64>,
    pub beta_sd: Vec<f64>,
    pub beta_q025: Vec<f64>,
    pub beta_q50: Vec<f64>,
    pub beta_q975: Vec<f64>,
    pub sigma_sq_mean: f64,
    pub tau_sq_mean: f64,
    pub gamma_mean: Vec<f64>,
    pub kappa_sq_mean: Vec<f64>,
    /// Posterior mean of `lambda_j^2 / (1 + lambda_j^2)`.
    pub inclusion: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_of<F: Fn(&GibbsState) -> f64>(draws: &[GibbsState], f: F) -> f64 {
    draws.iter().map(f).sum::<f64>() / draws.len() as f64
}

pub fn summarize(draws: &PosteriorDraws) -> Result<FitSummary> {
    let d = &draws.draws;
    if d.is_empty() {
        return Err(Error::InvalidArgument("no retained draws to summarize".into()));
    }
    let p1 = d[0].beta.len();
    let mut out = FitSummary {
        beta_mean: Vec::with_capacity(p1),
        beta_sd: Vec::with_capacity(p1),
        beta_q025: Vec::with_capacity(p1),
        beta_q50: Vec::with_capacity(p1),
        beta_q975: Vec::with_capacity(p1),
        sigma_sq_mean: mean_of(d, |s| s.sigma_sq),
        tau_sq_mean: mean_of(d, |s| s.tau_sq),
        gamma_mean: (0..d[0].gamma.len()).map(|k| mean_of(d, |s| s.gamma[k])).collect(),
        kappa_sq_mean: (0..d[0].kappa_sq.len()).map(|k| mean_of(d, |s| s.kappa_sq[k])).collect(),
        inclusion: (0..d[0].lambda.len())
            .map(|j| {
                mean_of(d, |s| {
                    let l2 = s.lambda[j] * s.lambda[j];
                    if l2.is_infinite() {
                        1.0
                    } else {
                        l2 / (1.0 + l2)
                    }
                })
            })
            .collect(),
    };
    let mut col = vec![0.0; d.len()];
    for j in 0..p1 {
        for (c, s) in col.iter_mut().zip(d) {
            *c = s.beta[j];
        }
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = if col.len() > 1 {
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        out.beta_mean.push(mean);
        out.beta_sd.push(sd);
        out.beta_q025.push(quantile(&col, 0.025));
        out.beta_q50.push(quantile(&col, 0.5));
        out.beta_q975.push(quantile(&col, 0.975));
    }
    Ok(out)
}
