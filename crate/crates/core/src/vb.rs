//! Coordinate-ascent variational inference for the linear and probit models.
//!
//! Mean-field factors: `q(beta) = N(mu, V)`, inverse-Gamma factors for
//! `lambda0^2, psi0, phi_j^2, kappa_d^2, tau^2, zeta, sigma^2`, a Gaussian
//! `q(gamma) = N(mu_gamma, s0^2 Sigma_gamma)` and the non-standard local-scale
//! factors `q(lambda_j) ∝ lambda^-1 exp(-a/lambda^2 - b lambda^2 + c lambda)`.
//! Probit fits add truncated-normal latent factors `q(w_i)` and fix `sigma^2 = 1`.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::fast_gaussian::{DiagPrecision, PosteriorGaussian};
use crate::model::{validate, Dataset, Hyperparameters, Task};
use crate::special::lambda::{factor_expectation, lambda_moments, LambdaFactorParams, LambdaMoments};
use crate::special::normal::{
    log_normal_positive_mass, log_side_mass, trunc_normal_mean, trunc_normal_second_central, Side,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VBConfig {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for VBConfig {
    fn default() -> Self {
        Self { eps: 1e-3, max_iter: 1000 }
    }
}

/// Every variational parameter plus the cached moments the updates share.
#[derive(Debug, Clone, PartialEq)]
pub struct VBState {
    pub task: Task,
    pub mu_beta: DVector<f64>,
    /// Diagonal of the covariance of `q(beta)`.
    pub diag_sigma_beta: DVector<f64>,
    pub log_det_sigma_beta: f64,
    /// `tr(X Cov(beta) X')`.
    pub trace_xsx: f64,
    pub a0_star: f64,
    pub k0_star: f64,
    pub lambda_params: Vec<LambdaFactorParams>,
    pub d_star: DVector<f64>,
    pub lambda_moments: Vec<LambdaMoments>,
    pub mu_gamma: DVector<f64>,
    /// `q(gamma)` has covariance `s0^2 * sigma_gamma`.
    pub sigma_gamma: DMatrix<f64>,
    pub e_star: DVector<f64>,
    pub f_star: DVector<f64>,
    pub g_star: f64,
    pub h_star: f64,
    /// Rate of `q(sigma^2)`; unused for probit fits.
    pub l_star: f64,
    /// Location `x_i' E[beta]` of each `q(w_i)` (probit only).
    pub mu_w: Option<DVector<f64>>,
    /// `E[w_i]` (probit only).
    pub e_w: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VBFit {
    pub state: VBState,
    pub elbo_trace: Vec<f64>,
    /// Per-iteration breakdown matching `elbo_trace`.
    pub terms: Vec<ElboTerms>,
    pub converged: bool,
}

/// The lower bound split into the pieces that tests and diagnostics inspect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    /// Lower bound for the model the coordinate updates optimize.
    pub total: f64,
    /// `sum_j log s_j` (already inside `total`).
    pub log_s_sum: f64,
    /// `sum_j log k_j` with `k_j = P(N(z_j' mu_gamma, s0^2 d_j) > 0)` (not in `total`).
    pub log_k_sum: f64,
}

impl ElboTerms {
    /// Bound including the truncation normalizers, `total - sum_j log k_j`.
    pub fn with_truncation(&self) -> f64 {
        self.total - self.log_k_sum
    }
}

struct Problem<'a> {
    task: Task,
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    xtx: Option<DMatrix<f64>>,
    z: DMatrix<f64>,
    groups: Vec<Range<usize>>,
    hyper: &'a Hyperparameters,
    sides: Vec<Side>,
}

impl<'a> Problem<'a> {
    fn new(dataset: &'a Dataset, hyper: &'a Hyperparameters, task: Task) -> Result<Self> {
        validate(dataset, hyper, task)?;
        let x = &dataset.x;
        let sides = dataset
            .y
            .iter()
            .map(|&v| if v == 1.0 { Side::RightOfZero } else { Side::LeftOfZero })
            .collect();
        Ok(Self {
            task,
            x,
            y: &dataset.y,
            xtx: (x.ncols() <= x.nrows()).then(|| x.tr_mul(x)),
            z: dataset.stacked_codata(),
            groups: dataset.group_ranges(),
            hyper,
            sides,
        })
    }

    fn n(&self) -> usize {
        self.x.nrows()
    }

    fn p(&self) -> usize {
        self.x.ncols() - 1
    }

    fn sigma_shape(&self) -> f64 {
        self.hyper.v + (self.n() + self.p() + 1) as f64 / 2.0
    }

    fn tau_shape(&self) -> f64 {
        self.p() as f64 / 2.0 + 1.0
    }

    /// `E[1/sigma^2]`.
    fn e_prec(&self, s: &VBState) -> f64 {
        match self.task {
            Task::Linear => self.sigma_shape() / s.l_star,
            Task::Probit => 1.0,
        }
    }

    fn e_tau_inv(&self, s: &VBState) -> f64 {
        self.tau_shape() / s.g_star
    }

    /// `E[lambda_j^-2]` with `j = 0` the intercept.
    fn e_lambda_inv2(&self, s: &VBState, j: usize) -> f64 {
        if j == 0 {
            1.0 / s.a0_star
        } else {
            s.lambda_moments[j - 1].m_neg2
        }
    }

    fn e_beta_sq(&self, s: &VBState, j: usize) -> f64 {
        s.mu_beta[j] * s.mu_beta[j] + s.diag_sigma_beta[j]
    }

    /// `sum_{j=0}^p E[beta_j^2] E[lambda_j^-2]`.
    fn weighted_beta_sq(&self, s: &VBState) -> f64 {
        (0..=self.p()).map(|j| self.e_beta_sq(s, j) * self.e_lambda_inv2(s, j)).sum()
    }

    fn init(&self) -> Result<VBState> {
        let (p, m) = (self.p(), self.z.ncols());
        let h = self.hyper;
        let seed = LambdaFactorParams::new(1.0, 1.0, 0.0);
        let seed_moments = lambda_moments(&seed)?;
        let e_star: DVector<f64> =
            DVector::from_iterator(self.groups.len(), self.groups.iter().enumerate().map(|(d, r)| h.a[d] + r.len() as f64 / 2.0));
        // rates put each factor's mean at the prior mean (rate/shape when undefined)
        let prior_scale = |a: f64, b: f64| if a > 1.0 { b / (a - 1.0) } else { b / a };
        let f_star = DVector::from_fn(self.groups.len(), |d, _| e_star[d] * prior_scale(h.a[d], h.b[d]));
        let mut s = VBState {
            task: self.task,
            mu_beta: DVector::zeros(p + 1),
            diag_sigma_beta: DVector::zeros(p + 1),
            log_det_sigma_beta: 0.0,
            trace_xsx: 0.0,
            a0_star: 1.0,
            k0_star: 2.0,
            lambda_params: vec![seed; p],
            d_star: DVector::from_element(p, 1.0),
            lambda_moments: vec![seed_moments; p],
            mu_gamma: DVector::zeros(m),
            sigma_gamma: DMatrix::identity(m, m),
            e_star,
            f_star,
            // zeta and psi0 start at rate/shape of IG(1/2, 1); tau^2, lambda0^2
            // at rate/shape of their conditional priors given those starts
            g_star: self.tau_shape(),
            h_star: 2.0,
            l_star: self.sigma_shape() * prior_scale(h.v, h.q),
            mu_w: None,
            e_w: None,
        };
        s.sigma_gamma = self.gamma_cov(&s)?;
        if self.task == Task::Probit {
            s.mu_w = Some(DVector::zeros(self.n()));
            s.e_w = Some(DVector::zeros(self.n()));
        }
        Ok(s)
    }

    fn update_w(&self, s: &mut VBState) {
        let mu = self.x * &s.mu_beta;
        let ew = DVector::from_fn(self.n(), |i, _| trunc_normal_mean(mu[i], self.sides[i]));
        s.mu_w = Some(mu);
        s.e_w = Some(ew);
    }

    fn update_beta(&self, s: &mut VBState) -> Result<()> {
        let et = self.e_tau_inv(s);
        let es = self.e_prec(s);
        let delta = DVector::from_fn(self.p() + 1, |j, _| et * self.e_lambda_inv2(s, j));
        let delta = DiagPrecision::new(delta)?;
        let g = PosteriorGaussian::new(self.x, self.xtx.as_ref(), &delta)?;
        let target = match self.task {
            Task::Linear => self.y,
            Task::Probit => s.e_w.as_ref().expect("latent means set before beta"),
        };
        s.mu_beta = g.mean_xt(self.x, target);
        s.diag_sigma_beta = g.diag() / es;
        s.log_det_sigma_beta = g.logdet() - (self.p() + 1) as f64 * es.ln();
        s.trace_xsx = g.trace_xsx() / es;
        Ok(())
    }

    fn update_lambda0(&self, s: &mut VBState) {
        let et = self.e_tau_inv(s);
        let es = self.e_prec(s);
        s.a0_star = 1.0 / s.k0_star + 0.5 * self.e_beta_sq(s, 0) * es * et;
        s.k0_star = 1.0 + 1.0 / s.a0_star;
    }

    fn update_local(&self, s: &mut VBState) -> Result<()> {
        let et = self.e_tau_inv(s);
        let es = self.e_prec(s);
        let s0 = self.hyper.s0_sq;
        let eta = &self.z * &s.mu_gamma;
        let zsz = self.codata_quad(s);
        let state = &*s;
        let updated: Vec<Result<(LambdaFactorParams, LambdaMoments, f64)>> = (0..self.p())
            .into_par_iter()
            .map(|j| {
                let d = state.d_star[j];
                let params = LambdaFactorParams::new(
                    0.5 * self.e_beta_sq(state, j + 1) * es * et,
                    1.0 / (2.0 * s0 * d),
                    eta[j] / (s0 * d),
                );
                let moments = if close(&params, &state.lambda_params[j]) {
                    state.lambda_moments[j]
                } else {
                    lambda_moments(&params)?
                };
                let res = moments.m2 - 2.0 * moments.m1 * eta[j] + eta[j] * eta[j] + s0 * zsz[j];
                Ok((params, moments, 0.5 + res / (2.0 * s0)))
            })
            .collect();
        for (j, r) in updated.into_iter().enumerate() {
            let (params, moments, d) = r?;
            s.lambda_params[j] = params;
            s.lambda_moments[j] = moments;
            s.d_star[j] = d;
        }
        Ok(())
    }

    /// `z_j' Sigma_gamma z_j` for every row of the stacked co-data.
    fn codata_quad(&self, s: &VBState) -> DVector<f64> {
        let zs = &self.z * &s.sigma_gamma;
        DVector::from_fn(self.p(), |j, _| zs.row(j).dot(&self.z.row(j)))
    }

    fn gamma_cov(&self, s: &VBState) -> Result<DMatrix<f64>> {
        let s0 = self.hyper.s0_sq;
        let mut zw = self.z.clone();
        for (j, mut row) in zw.row_iter_mut().enumerate() {
            row /= s.d_star[j];
        }
        let mut prec = zw.tr_mul(&self.z);
        for (d, r) in self.groups.iter().enumerate() {
            let ek = s.e_star[d] / s.f_star[d];
            for k in r.clone() {
                prec[(k, k)] += s0 * ek;
            }
        }
        let chol = Cholesky::new(prec).ok_or(Error::SingularSystem("gamma precision"))?;
        Ok(chol.inverse())
    }

    fn update_gamma(&self, s: &mut VBState) -> Result<()> {
        s.sigma_gamma = self.gamma_cov(s)?;
        let w = DVector::from_fn(self.p(), |j, _| s.lambda_moments[j].m1 / s.d_star[j]);
        s.mu_gamma = &s.sigma_gamma * self.z.tr_mul(&w);
        Ok(())
    }

    fn update_kappa(&self, s: &mut VBState) {
        let s0 = self.hyper.s0_sq;
        for (d, r) in self.groups.iter().enumerate() {
            let mu = s.mu_gamma.rows(r.start, r.len()).norm_squared();
            let tr: f64 = r.clone().map(|k| s.sigma_gamma[(k, k)]).sum();
            s.f_star[d] = self.hyper.b[d] + 0.5 * (mu + s0 * tr);
        }
    }

    fn update_tau(&self, s: &mut VBState) {
        let es = self.e_prec(s);
        s.g_star = 1.0 / s.h_star + 0.5 * es * self.weighted_beta_sq(s);
        s.h_star = 1.0 + self.e_tau_inv(s);
    }

    fn expected_rss(&self, s: &VBState) -> f64 {
        (self.y - self.x * &s.mu_beta).norm_squared() + s.trace_xsx
    }

    fn update_sigma(&self, s: &mut VBState) {
        let et = self.e_tau_inv(s);
        s.l_star = self.hyper.q + 0.5 * (self.expected_rss(s) + et * self.weighted_beta_sq(s));
    }

    fn sweep(&self, s: &mut VBState) -> Result<()> {
        if self.task == Task::Probit {
            self.update_w(s);
        }
        self.update_beta(s)?;
        self.update_lambda0(s);
        self.update_local(s)?;
        self.update_gamma(s)?;
        self.update_kappa(s);
        self.update_tau(s);
        if self.task == Task::Linear {
            self.update_sigma(s);
        }
        Ok(())
    }

    fn elbo(&self, s: &VBState) -> ElboTerms {
        let (n, p) = (self.n() as f64, self.p());
        let pf = p as f64;
        let h = self.hyper;
        let s0 = h.s0_sq;
        let lg_half = ln_gamma(0.5);
        let dg1 = digamma(1.0);
        let ig_entropy = |a: f64, b: f64| a + b.ln() + ln_gamma(a) - (1.0 + a) * digamma(a);

        let (es, elog_s2) = match self.task {
            Task::Linear => {
                let a = self.sigma_shape();
                (a / s.l_star, s.l_star.ln() - digamma(a))
            }
            Task::Probit => (1.0, 0.0),
        };
        let et = self.e_tau_inv(s);
        let elog_t = s.g_star.ln() - digamma(self.tau_shape());
        let ez = 1.0 / s.h_star;
        let elog_z = s.h_star.ln() - dg1;
        let el0 = 1.0 / s.a0_star;
        let elog_l0 = s.a0_star.ln() - dg1;
        let ep0 = 1.0 / s.k0_star;
        let elog_p0 = s.k0_star.ln() - dg1;

        let mut total = 0.0;
        // likelihood
        match self.task {
            Task::Linear => {
                total += -0.5 * n * LN_2PI - 0.5 * n * elog_s2 - 0.5 * es * self.expected_rss(s);
            }
            Task::Probit => {
                let mu_w = s.mu_w.as_ref().expect("probit state");
                let e_w = s.e_w.as_ref().expect("probit state");
                let fitted = self.x * &s.mu_beta;
                let mut acc = 0.0;
                for i in 0..self.n() {
                    let second = trunc_normal_second_central(mu_w[i], self.sides[i]);
                    let shift = e_w[i] - mu_w[i];
                    let var = second - shift * shift;
                    acc += -0.5 * LN_2PI - 0.5 * (var + (e_w[i] - fitted[i]).powi(2));
                    // entropy of the truncated normal
                    acc += 0.5 * LN_2PI + 0.5 * second + log_side_mass(mu_w[i], self.sides[i]);
                }
                total += acc - 0.5 * s.trace_xsx;
            }
        }
        // beta | sigma, tau, lambda (the E[log lambda_j] parts cancel against the entropies)
        total += (pf + 1.0) * (-0.5 * LN_2PI - 0.5 * elog_s2 - 0.5 * elog_t) - 0.5 * elog_l0
            - 0.5 * es * et * self.weighted_beta_sq(s);
        // lambda0^2 | psi0 and psi0
        total += -0.5 * elog_p0 - lg_half - 1.5 * elog_l0 - ep0 * el0;
        total += -lg_half - 1.5 * elog_p0 - ep0;
        // lambda_j | gamma, phi_j and phi_j
        let eta = &self.z * &s.mu_gamma;
        let zsz = self.codata_quad(s);
        let mut log_s_sum = 0.0;
        let mut log_k_sum = 0.0;
        for j in 0..p {
            let d = s.d_star[j];
            let m = &s.lambda_moments[j];
            let lp = &s.lambda_params[j];
            let elog_phi = d.ln() - dg1;
            let res = m.m2 - 2.0 * m.m1 * eta[j] + eta[j] * eta[j] + s0 * zsz[j];
            total += -0.5 * LN_2PI - 0.5 * s0.ln() - 0.5 * elog_phi - res / (2.0 * s0 * d);
            total += 0.5 * 0.5f64.ln() - lg_half - 1.5 * elog_phi - 0.5 / d;
            total += ig_entropy(1.0, d);
            total += m.log_s + lp.a_star * m.m_neg2 + lp.b_star * m.m2 - lp.c_star * m.m1;
            log_s_sum += m.log_s;
            log_k_sum += log_normal_positive_mass(eta[j], s0 * d);
        }
        // gamma | kappa and kappa
        for (d, r) in self.groups.iter().enumerate() {
            let md = r.len() as f64;
            let (e, f) = (s.e_star[d], s.f_star[d]);
            let ek = e / f;
            let elog_k = f.ln() - digamma(e);
            let mu = s.mu_gamma.rows(r.start, r.len()).norm_squared();
            let tr: f64 = r.clone().map(|k| s.sigma_gamma[(k, k)]).sum();
            total += -0.5 * md * LN_2PI - 0.5 * md * elog_k - 0.5 * ek * (mu + s0 * tr);
            total += h.a[d] * h.b[d].ln() - ln_gamma(h.a[d]) - (h.a[d] + 1.0) * elog_k - h.b[d] * ek;
            total += ig_entropy(e, f);
        }
        // tau^2 | zeta and zeta
        total += -0.5 * elog_z - lg_half - 1.5 * elog_t - ez * et;
        total += -lg_half - 1.5 * elog_z - ez;
        // sigma^2
        if self.task == Task::Linear {
            total += h.v * h.q.ln() - ln_gamma(h.v) - (h.v + 1.0) * elog_s2 - h.q * es;
            total += ig_entropy(self.sigma_shape(), s.l_star);
        }
        // remaining entropies
        let pb = pf + 1.0;
        total += 0.5 * pb * (1.0 + LN_2PI) + 0.5 * s.log_det_sigma_beta;
        let m = self.z.ncols() as f64;
        let logdet_g = Cholesky::new(s.sigma_gamma.clone())
            .map(|c| 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
            .unwrap_or(f64::NEG_INFINITY);
        total += 0.5 * m * (1.0 + LN_2PI) + 0.5 * (m * s0.ln() + logdet_g);
        total += ig_entropy(1.0, s.a0_star) + ig_entropy(1.0, s.k0_star);
        total += ig_entropy(self.tau_shape(), s.g_star) + ig_entropy(1.0, s.h_star);

        ElboTerms { total, log_s_sum, log_k_sum }
    }
}

fn close(a: &LambdaFactorParams, b: &LambdaFactorParams) -> bool {
    let rel = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    rel(a.a_star, b.a_star) && rel(a.b_star, b.b_star) && rel(a.c_star, b.c_star)
}

fn elbo_tolerance(value: f64) -> f64 {
    1e-6f64.max(1e-6 * value.abs())
}

fn run(dataset: &Dataset, hyper: &Hyperparameters, config: &VBConfig, task: Task) -> Result<VBFit> {
    if !(config.eps > 0.0) || config.max_iter == 0 {
        return Err(Error::InvalidArgument("VB needs eps > 0 and max_iter >= 1".into()));
    }
    let prob = Problem::new(dataset, hyper, task)?;
    let mut state = prob.init()?;
    let mut trace: Vec<f64> = Vec::new();
    let mut terms = Vec::new();
    let mut converged = false;
    for it in 1..=config.max_iter {
        prob.sweep(&mut state)?;
        let t = prob.elbo(&state);
        terms.push(t);
        let value = t.total;
        if !value.is_finite() {
            return Err(Error::NumericalOverflow { iteration: it, what: "lower bound".into() });
        }
        if let Some(&prev) = trace.last() {
            let gain = value - prev;
            if gain < -elbo_tolerance(prev) {
                return Err(Error::ElboDecrease { iteration: it, drop: -gain });
            }
            trace.push(value);
            if gain < config.eps {
                converged = true;
                break;
            }
        } else {
            trace.push(value);
        }
    }
    Ok(VBFit { state, elbo_trace: trace, terms, converged })
}

pub fn run_cavi_linear(dataset: &Dataset, hyper: &Hyperparameters, config: &VBConfig) -> Result<VBFit> {
    run(dataset, hyper, config, Task::Linear)
}

pub fn run_cavi_probit(dataset: &Dataset, hyper: &Hyperparameters, config: &VBConfig) -> Result<VBFit> {
    run(dataset, hyper, config, Task::Probit)
}

/// Lower bound of `state`, split into its reported pieces.
pub fn elbo_terms(state: &VBState, dataset: &Dataset, hyper: &Hyperparameters) -> Result<ElboTerms> {
    let prob = Problem::new(dataset, hyper, state.task)?;
    check_state_dims(&prob, state)?;
    Ok(prob.elbo(state))
}

pub fn compute_elbo(state: &VBState, dataset: &Dataset, hyper: &Hyperparameters) -> Result<f64> {
    Ok(elbo_terms(state, dataset, hyper)?.total)
}

fn check_state_dims(prob: &Problem, s: &VBState) -> Result<()> {
    let ok = s.mu_beta.len() == prob.p() + 1
        && s.lambda_moments.len() == prob.p()
        && s.mu_gamma.len() == prob.z.ncols()
        && s.e_star.len() == prob.groups.len();
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("variational state does not match the dataset".into()))
    }
}

/// Which block [`single_block_update`] re-runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Latent,
    Beta,
    Lambda0,
    Local,
    Gamma,
    Kappa,
    Tau,
    Sigma,
}

/// Apply one block update to a copy of `state` (fixed-point diagnostics).
pub fn single_block_update(state: &VBState, dataset: &Dataset, hyper: &Hyperparameters, block: Block) -> Result<VBState> {
    let prob = Problem::new(dataset, hyper, state.task)?;
    check_state_dims(&prob, state)?;
    let mut s = state.clone();
    match block {
        Block::Latent if s.task == Task::Probit => prob.update_w(&mut s),
        Block::Latent => {}
        Block::Beta => prob.update_beta(&mut s)?,
        Block::Lambda0 => prob.update_lambda0(&mut s),
        Block::Local => prob.update_local(&mut s)?,
        Block::Gamma => prob.update_gamma(&mut s)?,
        Block::Kappa => prob.update_kappa(&mut s),
        Block::Tau => prob.update_tau(&mut s),
        Block::Sigma if s.task == Task::Linear => prob.update_sigma(&mut s),
        Block::Sigma => {}
    }
    Ok(s)
}

impl VBState {
    /// `E[lambda_j^2 / (1 + lambda_j^2)]` under each local-scale factor.
    pub fn inclusion_probs(&self) -> Result<Vec<f64>> {
        self.lambda_params
            .par_iter()
            .map(|p| factor_expectation(p, |x| x * x / (1.0 + x * x)))
            .collect()
    }

    /// Posterior standard deviations of the coefficients.
    pub fn beta_sd(&self) -> DVector<f64> {
        self.diag_sigma_beta.map(f64::sqrt)
    }
}
