//! Normalizer and moments of the variational local-scale factor
//! `q(x) ∝ x^-1 exp(-a/x^2 - b x^2 + c x)`.
//!
//! Each integral `I(nu) = ∫ x^nu exp(-a/x^2 - b x^2 + c x) dx` is evaluated on
//! the log scale: the log-kernel is shifted by its value at the global mode so
//! the integrand peaks at one, integrated adaptively and the shift is added back.

use serde::{Deserialize, Serialize};

use super::quadrature::{integrate, Tolerance};
use super::quartic::{local_maxima, log_kernel, log_kernel_curvature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaFactorParams {
    pub a_star: f64,
    pub b_star: f64,
    pub c_star: f64,
}

impl LambdaFactorParams {
    pub fn new(a_star: f64, b_star: f64, c_star: f64) -> Self {
        Self { a_star, b_star, c_star }
    }

    fn check(&self) -> Result<()> {
        if self.a_star > 0.0
            && self.b_star > 0.0
            && self.a_star.is_finite()
            && self.b_star.is_finite()
            && self.c_star.is_finite()
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "lambda factor needs a* > 0, b* > 0 and finite c*, got ({}, {}, {})",
                self.a_star, self.b_star, self.c_star
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMoments {
    /// `log ∫ x^-1 exp(-a/x^2 - b x^2 + c x) dx`.
    pub log_s: f64,
    pub m1: f64,
    pub m2: f64,
    pub m_neg2: f64,
}

const TAIL: f64 = 1e-16;
const MAX_EXPANSIONS: usize = 30;

/// Mode, log-peak and quadrature partition for one exponent.
struct Layout {
    log_peak: f64,
    points: Vec<f64>,
}

fn layout(nu: i32, p: &LambdaFactorParams) -> Result<Layout> {
    let (a, b, c) = (p.a_star, p.b_star, p.c_star);
    let maxima = local_maxima(nu, a, b, c)?;
    let h = |x: f64| log_kernel(nu, a, b, c, x);
    let (mode, log_peak) = maxima
        .iter()
        .map(|&x| (x, h(x)))
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    let lo_mode = maxima[0];
    let hi_mode = *maxima.last().expect("non-empty");

    let mut s = 10.0;
    let mut expansions = 0;
    let (lo, hi) = loop {
        let lo = lo_mode / s;
        let hi = hi_mode * s;
        if (h(lo) - log_peak).exp() < TAIL && (h(hi) - log_peak).exp() < TAIL {
            break (lo, hi);
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::QuadratureFailure(format!(
                "could not bracket kernel nu={nu} a={a} b={b} c={c}"
            )));
        }
        s *= 10.0;
    };

    let mut points = vec![lo, hi];
    for &m in &maxima {
        points.push(m);
        let curv = -log_kernel_curvature(nu, a, b, m);
        let w = if curv > 0.0 { 1.0 / curv.sqrt() } else { 0.5 * m };
        for k in [1.0, 2.0, 4.0, 8.0] {
            points.push(m - k * w);
            points.push(m + k * w);
        }
    }
    // Decade markers cover long power-law stretches between the modes and tails.
    let mut x = mode / 10.0;
    while x > lo {
        points.push(x);
        x /= 10.0;
    }
    let mut x = mode * 10.0;
    while x < hi {
        points.push(x);
        x *= 10.0;
    }
    points.retain(|&x| x >= lo && x <= hi && x.is_finite());
    points.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    points.dedup();
    Ok(Layout { log_peak, points })
}

fn log_integral_with<W: Fn(f64) -> f64>(nu: i32, p: &LambdaFactorParams, weight: W) -> Result<f64> {
    let lay = layout(nu, p)?;
    let (a, b, c) = (p.a_star, p.b_star, p.c_star);
    let peak = lay.log_peak;
    let f = |x: f64| weight(x) * (log_kernel(nu, a, b, c, x) - peak).exp();
    let est = integrate(&f, &lay.points, Tolerance::default())?;
    if !(est.value > 0.0) {
        return Err(Error::QuadratureFailure(format!("non-positive integral for nu={nu}")));
    }
    Ok(peak + est.value.ln())
}

/// `log ∫_0^inf x^nu exp(-a/x^2 - b x^2 + c x) dx`.
pub fn log_kernel_integral(nu: i32, p: &LambdaFactorParams) -> Result<f64> {
    p.check()?;
    log_integral_with(nu, p, |_| 1.0)
}

/// Normalizer and the moments `E[x]`, `E[x^2]`, `E[x^-2]` of the factor.
pub fn lambda_moments(p: &LambdaFactorParams) -> Result<LambdaMoments> {
    p.check()?;
    let base = log_integral_with(-1, p, |_| 1.0)?;
    let l0 = log_integral_with(0, p, |_| 1.0)?;
    let l1 = log_integral_with(1, p, |_| 1.0)?;
    let l3 = log_integral_with(-3, p, |_| 1.0)?;
    Ok(LambdaMoments {
        log_s: base,
        m1: (l0 - base).exp(),
        m2: (l1 - base).exp(),
        m_neg2: (l3 - base).exp(),
    })
}

/// `E[g(x)]` under the factor for a nonnegative weight `g`.
pub fn factor_expectation<G: Fn(f64) -> f64>(p: &LambdaFactorParams, g: G) -> Result<f64> {
    p.check()?;
    let base = log_integral_with(-1, p, |_| 1.0)?;
    let num = log_integral_with(-1, p, g)?;
    Ok((num - base).exp())
}
