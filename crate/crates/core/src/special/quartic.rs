//! Mode finding for the kernel family `x^nu exp(-d/x^2 - b x^2 + c x)` on `(0, inf)`.
//!
//! Stationary points of the log-kernel are the positive roots of
//! `P(x) = 2b x^4 - c x^3 - nu x^2 - 2d`. Because `P'(x) = x (8b x^2 - 3c x - 2nu)`
//! has closed-form roots, `(0, R]` splits into at most three monotone pieces;
//! each upward sign change of `P` is a local maximum and is located by a
//! safeguarded Newton iteration. The kernel can be bimodal, so all local maxima
//! are kept and compared on the log scale.

use crate::error::{Error, Result};

/// `log(x^nu exp(-d/x^2 - b x^2 + c x))`.
#[inline]
pub fn log_kernel(nu: i32, d: f64, b: f64, c: f64, x: f64) -> f64 {
    let mut h = -b * x * x + c * x;
    if d != 0.0 {
        h -= d / (x * x);
    }
    if nu != 0 {
        h += nu as f64 * x.ln();
    }
    h
}

/// Second derivative of [`log_kernel`] with respect to `x`.
#[inline]
pub fn log_kernel_curvature(nu: i32, d: f64, b: f64, x: f64) -> f64 {
    let x2 = x * x;
    -(nu as f64) / x2 - 6.0 * d / (x2 * x2) - 2.0 * b
}

#[inline]
fn poly(nu: f64, d: f64, b: f64, c: f64, x: f64) -> f64 {
    let x2 = x * x;
    ((2.0 * b * x - c) * x - nu) * x2 - 2.0 * d
}

#[inline]
fn poly_deriv(nu: f64, b: f64, c: f64, x: f64) -> f64 {
    x * ((8.0 * b * x - 3.0 * c) * x - 2.0 * nu)
}

fn poly_scale(nu: f64, d: f64, b: f64, c: f64, x: f64) -> f64 {
    let x2 = x * x;
    2.0 * b * x2 * x2 + (c * x2 * x).abs() + (nu * x2).abs() + 2.0 * d
}

/// Root of `P` in `[lo, hi]` given `P(lo) < 0 < P(hi)`.
fn bracketed_root(nu: f64, d: f64, b: f64, c: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let p = poly(nu, d, b, c, x);
        if p == 0.0 {
            return x;
        }
        if p < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dp = poly_deriv(nu, b, c, x);
        let newton = x - p / dp;
        let next = if dp != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// All interior local maxima of the kernel, in increasing order.
pub fn local_maxima(nu: i32, d: f64, b: f64, c: f64) -> Result<Vec<f64>> {
    let fail = || Error::NoPositiveRoot { nu, d, b, c };
    if !(b > 0.0) || !(d >= 0.0) || !b.is_finite() || !d.is_finite() || !c.is_finite() {
        return Err(fail());
    }
    let nuf = nu as f64;

    if d == 0.0 {
        // P = x^2 (2b x^2 - c x - nu); the only candidate is the larger root
        // of the quadratic, and it is a maximum only when it is positive.
        let disc = c * c + 8.0 * b * nuf;
        if disc < 0.0 {
            return Err(fail());
        }
        let root = if c >= 0.0 {
            (c + disc.sqrt()) / (4.0 * b)
        } else {
            // avoid cancellation: r+ = -2nu / (c - sqrt(disc))
            -2.0 * nuf / (c - disc.sqrt())
        };
        return if root > 0.0 && root.is_finite() {
            Ok(vec![root])
        } else {
            Err(fail())
        };
    }

    // Critical points of P on (0, inf).
    let mut cuts = Vec::with_capacity(4);
    let disc = 9.0 * c * c + 64.0 * b * nuf;
    if disc >= 0.0 {
        let s = disc.sqrt();
        for r in [(3.0 * c - s) / (16.0 * b), (3.0 * c + s) / (16.0 * b)] {
            if r > 0.0 {
                cuts.push(r);
            }
        }
    }
    let bound = 1.0 + c.abs().max(nuf.abs()).max(2.0 * d) / (2.0 * b);
    let mut hi_end = bound;
    while poly(nuf, d, b, c, hi_end) <= 0.0 {
        hi_end *= 2.0;
        if !hi_end.is_finite() {
            return Err(fail());
        }
    }
    cuts.retain(|&r| r < hi_end);
    cuts.push(hi_end);

    let mut maxima = Vec::new();
    let mut lo = 0.0;
    let mut p_lo = -2.0 * d;
    for &hi in &cuts {
        let p_hi = poly(nuf, d, b, c, hi);
        if p_lo < 0.0 && p_hi > 0.0 {
            maxima.push(bracketed_root(nuf, d, b, c, lo, hi));
        } else if p_hi == 0.0 && p_lo < 0.0 {
            maxima.push(hi);
        }
        lo = hi;
        p_lo = p_hi;
    }
    if maxima.is_empty() {
        return Err(fail());
    }
    Ok(maxima)
}

/// Global maximizer of `x^nu exp(-d/x^2 - b x^2 + c x)` on `(0, inf)`.
///
/// The result is a positive root of `2b x^4 - c x^3 - nu x^2 - 2d`, with
/// residual below `1e-10` relative to the size of the polynomial's terms.
pub fn quartic_mode(nu: i32, d: f64, b: f64, c: f64) -> Result<f64> {
    let maxima = local_maxima(nu, d, b, c)?;
    let best = maxima
        .iter()
        .copied()
        .max_by(|x, y| {
            log_kernel(nu, d, b, c, *x)
                .partial_cmp(&log_kernel(nu, d, b, c, *y))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("non-empty");
    let nuf = nu as f64;
    let resid = poly(nuf, d, b, c, best).abs();
    if resid > 1e-10 * poly_scale(nuf, d, b, c, best) {
        return Err(Error::NoPositiveRoot { nu, d, b, c });
    }
    Ok(best)
}
