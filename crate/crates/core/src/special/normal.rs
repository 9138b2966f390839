//! Standard-normal helpers that stay accurate deep in the tails.

use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Truncation to `(-inf, 0)`.
    LeftOfZero,
    /// Truncation to `(0, inf)`.
    RightOfZero,
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Mills ratio `(1 - Phi(t)) / phi(t)` for `t >= 5` by continued fraction.
fn mills_ratio_upper(t: f64) -> f64 {
    let mut acc = t;
    for k in (1..=80).rev() {
        acc = t + k as f64 / acc;
    }
    1.0 / acc
}

/// `phi(x) / Phi(x)`, the inverse Mills ratio, without underflow for very negative `x`.
pub fn inverse_mills(x: f64) -> f64 {
    if x < -5.0 {
        1.0 / mills_ratio_upper(-x)
    } else {
        std_normal_pdf(x) / std_normal_cdf(x)
    }
}

/// `log Phi(x)`.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x < -5.0 {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio_upper(-x).ln()
    } else if x > 5.0 {
        // Phi(x) = 1 - tail with tail < 3e-7
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else {
        std_normal_cdf(x).ln()
    }
}

/// Mean of `N(mu, 1)` truncated to one side of zero.
pub fn trunc_normal_mean(mu: f64, side: Side) -> f64 {
    match side {
        Side::RightOfZero => mu + inverse_mills(mu),
        Side::LeftOfZero => mu - inverse_mills(-mu),
    }
}

/// `E[(w - mu)^2]` for `w ~ N(mu, 1)` truncated to one side of zero.
pub fn trunc_normal_second_central(mu: f64, side: Side) -> f64 {
    match side {
        Side::RightOfZero => 1.0 - mu * inverse_mills(mu),
        Side::LeftOfZero => 1.0 + mu * inverse_mills(-mu),
    }
}

/// `log P(w in side)` for `w ~ N(mu, 1)`.
pub fn log_side_mass(mu: f64, side: Side) -> f64 {
    match side {
        Side::RightOfZero => log_std_normal_cdf(mu),
        Side::LeftOfZero => log_std_normal_cdf(-mu),
    }
}

/// `P(N(mu, var) > 0)`.
pub fn normal_positive_mass(mu: f64, var: f64) -> f64 {
    std_normal_cdf(mu / var.sqrt())
}

/// `log P(N(mu, var) > 0)`.
pub fn log_normal_positive_mass(mu: f64, var: f64) -> f64 {
    log_std_normal_cdf(mu / var.sqrt())
}
