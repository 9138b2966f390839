//! Exact sampling of the local-scale full conditional
//! `f(x) ∝ x^-1 exp(-psi/x^2 - alpha^2 x^2 + beta x)` on `(0, inf)`.
//!
//! Proposals come from the three-parameter family
//! `g(x) ∝ x^gamma exp(-alpha^2 x^2 + beta x)` with `gamma` matched to the mode
//! of `f`, and are drawn by adaptive rejection sampling (the log-density of `g`
//! is concave for `gamma >= 0`). The ratio `f/g ∝ x^(-gamma-1) exp(-psi/x^2)` is
//! maximized at `sqrt(2 psi / (gamma + 1))`, which gives the acceptance rule.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::quartic::quartic_mode;

/// Proposals allowed per draw before [`Error::AcceptanceStall`].
pub const MAX_PROPOSALS: u64 = 1_000_000;
/// Floor applied to `psi` so that `beta_j = 0` does not produce a degenerate kernel.
pub const PSI_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaFullConditionalParams {
    pub psi: f64,
    pub alpha_sq: f64,
    pub beta_lin: f64,
}

impl LambdaFullConditionalParams {
    pub fn new(psi: f64, alpha_sq: f64, beta_lin: f64) -> Self {
        Self { psi, alpha_sq, beta_lin }
    }

    fn checked(self) -> Result<Self> {
        if !(self.alpha_sq > 0.0) || !self.alpha_sq.is_finite() || !self.beta_lin.is_finite() || !(self.psi >= 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "lambda full conditional needs psi >= 0, alpha^2 > 0, finite beta; got {self:?}"
            )));
        }
        Ok(Self { psi: self.psi.max(PSI_FLOOR), ..self })
    }
}

/// Mode-matched shape of the proposal: `round(x (2 alpha^2 x - beta))` at the
/// mode `x` of the target, clamped at zero.
pub fn choose_gamma(params: &LambdaFullConditionalParams) -> Result<u32> {
    let p = params.checked()?;
    let x = quartic_mode(-1, p.psi, p.alpha_sq, p.beta_lin)?;
    let g = (x * (2.0 * p.alpha_sq * x - p.beta_lin)).round();
    Ok(if g > 0.0 { g.min(u32::MAX as f64) as u32 } else { 0 })
}

/// Adaptive rejection sampler for `x^gamma exp(-alpha^2 x^2 + beta x)`.
#[derive(Debug, Clone)]
pub struct G3pSampler {
    gamma: f64,
    alpha_sq: f64,
    beta_lin: f64,
    /// Sorted abscissae with log-density and slope.
    t: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    /// Segment boundaries (len = t.len() + 1) and normalized cumulative masses.
    z: Vec<f64>,
    log_mass: Vec<f64>,
    cum: Vec<f64>,
}

const MAX_ABSCISSAE: usize = 40;

impl G3pSampler {
    pub fn new(gamma: u32, alpha_sq: f64, beta_lin: f64) -> Result<Self> {
        if !(alpha_sq > 0.0) || !alpha_sq.is_finite() || !beta_lin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "G3p needs alpha^2 > 0 and finite beta, got ({alpha_sq}, {beta_lin})"
            )));
        }
        let g = gamma as f64;
        let mode = if gamma == 0 {
            beta_lin.max(0.0) / (2.0 * alpha_sq)
        } else {
            let disc = beta_lin * beta_lin + 8.0 * alpha_sq * g;
            if beta_lin >= 0.0 {
                (beta_lin + disc.sqrt()) / (4.0 * alpha_sq)
            } else {
                // same root without cancellation
                4.0 * g / (disc.sqrt() - beta_lin)
            }
        };
        let mut s = Self {
            gamma: g,
            alpha_sq,
            beta_lin,
            t: Vec::new(),
            h: Vec::new(),
            dh: Vec::new(),
            z: Vec::new(),
            log_mass: Vec::new(),
            cum: Vec::new(),
        };
        let init: Vec<f64> = if mode > 0.0 {
            let w = 1.0 / (g / (mode * mode) + 2.0 * alpha_sq).sqrt();
            let left = if mode - w > 0.0 { mode - w } else { 0.5 * mode };
            vec![left, mode, mode + w]
        } else {
            let w = 1.0 / (2.0 * alpha_sq).sqrt();
            vec![0.5 * w, w, 2.0 * w]
        };
        for x in init {
            s.t.push(x);
            s.h.push(s.log_density(x));
            s.dh.push(s.slope(x));
        }
        s.rebuild();
        Ok(s)
    }

    #[inline]
    fn log_density(&self, x: f64) -> f64 {
        let base = -self.alpha_sq * x * x + self.beta_lin * x;
        if self.gamma == 0.0 {
            base
        } else {
            self.gamma * x.ln() + base
        }
    }

    #[inline]
    fn slope(&self, x: f64) -> f64 {
        self.gamma / x - 2.0 * self.alpha_sq * x + self.beta_lin
    }

    #[inline]
    fn hull(&self, i: usize, x: f64) -> f64 {
        self.h[i] + self.dh[i] * (x - self.t[i])
    }

    fn rebuild(&mut self) {
        let k = self.t.len();
        self.z.clear();
        self.z.push(0.0);
        for i in 0..k - 1 {
            let (t0, t1) = (self.t[i], self.t[i + 1]);
            let (d0, d1) = (self.dh[i], self.dh[i + 1]);
            let z = if (d0 - d1).abs() > 1e-300 {
                (self.h[i + 1] - self.h[i] - t1 * d1 + t0 * d0) / (d0 - d1)
            } else {
                0.5 * (t0 + t1)
            };
            self.z.push(z.clamp(t0, t1));
        }
        self.z.push(f64::INFINITY);

        self.log_mass.clear();
        for i in 0..k {
            let (a, b) = (self.z[i], self.z[i + 1]);
            let s = self.dh[i];
            let len = b - a;
            let lm = if len <= 0.0 {
                f64::NEG_INFINITY
            } else if s == 0.0 {
                self.hull(i, a) + len.ln()
            } else if s > 0.0 {
                // only finite segments can have positive slope
                self.hull(i, b) + (-(-s * len).exp_m1() / s).ln()
            } else {
                self.hull(i, a) + (-(s * len).exp_m1() / -s).ln()
            };
            self.log_mass.push(lm);
        }
        let top = self.log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.cum.clear();
        let mut acc = 0.0;
        for &lm in &self.log_mass {
            acc += (lm - top).exp();
            self.cum.push(acc);
        }
        for c in &mut self.cum {
            *c /= acc;
        }
    }

    fn insert(&mut self, x: f64) {
        if self.t.len() >= MAX_ABSCISSAE || !(x > 0.0) || !x.is_finite() {
            return;
        }
        let pos = self.t.partition_point(|&v| v < x);
        if (pos < self.t.len() && self.t[pos] == x) || (pos > 0 && self.t[pos - 1] == x) {
            return;
        }
        let (h, dh) = (self.log_density(x), self.slope(x));
        self.t.insert(pos, x);
        self.h.insert(pos, h);
        self.dh.insert(pos, dh);
        self.rebuild();
    }

    fn draw_from_hull<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.random();
        let i = self.cum.partition_point(|&c| c <= u).min(self.cum.len() - 1);
        let (a, b) = (self.z[i], self.z[i + 1]);
        let s = self.dh[i];
        let len = b - a;
        let v: f64 = rng.random();
        let x = if s == 0.0 {
            a + v * len
        } else if s < 0.0 {
            a + (v * (s * len).exp_m1()).ln_1p() / s
        } else {
            b + (v * (-s * len).exp_m1()).ln_1p() / s
        };
        (i, x.clamp(a, b))
    }

    /// One exact draw from `x^gamma exp(-alpha^2 x^2 + beta x)`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        loop {
            let (i, x) = self.draw_from_hull(rng);
            if !(x > 0.0) || !x.is_finite() {
                continue;
            }
            let e: f64 = 1.0 - rng.random::<f64>();
            let lx = self.log_density(x);
            if e.ln() <= lx - self.hull(i, x) {
                return x;
            }
            self.insert(x);
        }
    }
}

/// One draw from the G3p density `∝ x^gamma exp(-alpha^2 x^2 + beta x)`.
pub fn sample_g3p<R: Rng + ?Sized>(gamma: u32, alpha_sq: f64, beta_lin: f64, rng: &mut R) -> Result<f64> {
    Ok(G3pSampler::new(gamma, alpha_sq, beta_lin)?.sample(rng))
}

/// Rejection sampler for one local-scale full conditional.
#[derive(Debug, Clone)]
pub struct LambdaSampler {
    psi: f64,
    gamma: u32,
    log_xdot: f64,
    proposal: G3pSampler,
}

impl LambdaSampler {
    pub fn new(params: &LambdaFullConditionalParams) -> Result<Self> {
        let p = params.checked()?;
        let gamma = choose_gamma(&p)?;
        let xdot_sq = 2.0 * p.psi / (gamma as f64 + 1.0);
        Ok(Self {
            psi: p.psi,
            gamma,
            log_xdot: 0.5 * xdot_sq.ln(),
            proposal: G3pSampler::new(gamma, p.alpha_sq, p.beta_lin)?,
        })
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    /// The argmax of the acceptance probability.
    pub fn xdot(&self) -> f64 {
        self.log_xdot.exp()
    }

    /// `(x / xdot)^(-gamma-1) exp(psi/xdot^2 - psi/x^2)`, on the log scale.
    pub fn log_accept(&self, x: f64) -> f64 {
        let g1 = self.gamma as f64 + 1.0;
        -g1 * (x.ln() - self.log_xdot) + 0.5 * g1 - self.psi / (x * x)
    }

    /// Draw one value; returns the draw and the number of proposals used.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(f64, u64)> {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            if proposals > MAX_PROPOSALS {
                return Err(Error::AcceptanceStall { proposals: proposals - 1 });
            }
            let x = self.proposal.sample(rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            if u.ln() <= self.log_accept(x) {
                return Ok((x, proposals));
            }
        }
    }
}

/// Exact draw from the local-scale full conditional with its proposal count.
pub fn sample_lambda_fc<R: Rng + ?Sized>(
    params: &LambdaFullConditionalParams,
    rng: &mut R,
) -> Result<(f64, u64)> {
    LambdaSampler::new(params)?.sample(rng)
}

/// One stepping-out slice-sampling update of `t = log x` for the same target,
/// whose density in `t` is `exp(-psi e^-2t - alpha^2 e^2t + beta e^t)`.
pub fn slice_update<R: Rng + ?Sized>(params: &LambdaFullConditionalParams, current: f64, rng: &mut R) -> Result<f64> {
    let p = params.checked()?;
    let logf = |t: f64| -p.psi * (-2.0 * t).exp() - p.alpha_sq * (2.0 * t).exp() + p.beta_lin * t.exp();
    let t0 = current.ln();
    let level = logf(t0) + (1.0 - rng.random::<f64>()).ln();
    let width = 1.0;
    let mut lo = t0 - width * rng.random::<f64>();
    let mut hi = lo + width;
    let mut steps = 0;
    while logf(lo) > level && steps < 200 {
        lo -= width;
        steps += 1;
    }
    steps = 0;
    while logf(hi) > level && steps < 200 {
        hi += width;
        steps += 1;
    }
    loop {
        let t = lo + (hi - lo) * rng.random::<f64>();
        if logf(t) > level {
            return Ok(t.exp());
        }
        if t < t0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo < 1e-14 {
            return Ok(current);
        }
    }
}
