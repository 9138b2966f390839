//! Independent reference computations used by the integration tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Peak location and a bracket `[lo, hi]` in `u` outside which `g` has dropped
/// by more than 60 below its maximum.
fn bracket<G: Fn(f64) -> f64>(g: &G) -> (f64, f64, f64) {
    let mut peak = f64::NEG_INFINITY;
    let mut u_peak = 0.0;
    let mut u = -400.0;
    while u < 400.0 {
        let v = g(u);
        if v > peak {
            peak = v;
            u_peak = u;
        }
        u += 0.01;
    }
    let mut lo = u_peak;
    while g(lo) - peak > -60.0 && lo > -700.0 {
        lo -= 0.05;
    }
    let mut hi = u_peak;
    while g(hi) - peak > -60.0 && hi < 700.0 {
        hi += 0.05;
    }
    (lo, hi, peak)
}

/// CDF of `x^(power-1) exp(-psi/x^2 - a x^2 + b x)` on `(0, inf)`, tabulated by
/// a cumulative trapezoid rule in `u = log x`, where the density becomes
/// `exp(power u - psi e^-2u - a e^2u + b e^u)` and has no singularity.
pub struct LogGridCdf {
    u: Vec<f64>,
    cdf: Vec<f64>,
}

impl LogGridCdf {
    pub fn new(psi: f64, a: f64, b: f64, nodes: usize) -> Self {
        Self::with_power(0.0, psi, a, b, nodes)
    }

    pub fn with_power(power: f64, psi: f64, a: f64, b: f64, nodes: usize) -> Self {
        let g = |u: f64| power * u - psi * (-2.0 * u).exp() - a * (2.0 * u).exp() + b * u.exp();
        let (lo, hi, peak) = bracket(&g);
        let h = (hi - lo) / (nodes - 1) as f64;
        let us: Vec<f64> = (0..nodes).map(|i| lo + h * i as f64).collect();
        let dens: Vec<f64> = us.iter().map(|&u| (g(u) - peak).exp()).collect();
        let mut cdf = vec![0.0; nodes];
        for i in 1..nodes {
            cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
        }
        let total = cdf[nodes - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { u: us, cdf }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let u = x.ln();
        if u <= self.u[0] {
            return 0.0;
        }
        let last = self.u.len() - 1;
        if u >= self.u[last] {
            return 1.0;
        }
        let h = self.u[1] - self.u[0];
        let k = (((u - self.u[0]) / h) as usize).min(last - 1);
        let t = (u - self.u[k]) / h;
        self.cdf[k] + t * (self.cdf[k + 1] - self.cdf[k])
    }
}

/// `log ∫_0^inf x^nu exp(-a/x^2 - b x^2 + c x) dx` by the trapezoid rule on
/// `nodes` equispaced points in `u = log x`.
pub fn log_trapezoid(nu: i32, a: f64, b: f64, c: f64, nodes: usize) -> f64 {
    let g = |u: f64| (nu as f64 + 1.0) * u - a * (-2.0 * u).exp() - b * (2.0 * u).exp() + c * u.exp();
    let (lo, hi, peak) = bracket(&g);
    let h = (hi - lo) / (nodes - 1) as f64;
    let mut s = 0.0;
    for i in 0..nodes {
        let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
        s += w * (g(lo + h * i as f64) - peak).exp();
    }
    peak + (s * h).ln()
}

/// `log K_nu(z)` from `K_nu(z) = ∫_0^inf exp(-z cosh t) cosh(nu t) dt`, using the
/// trapezoid rule (spectrally accurate for this analytic, decaying integrand).
pub fn log_bessel_k(nu: f64, z: f64) -> f64 {
    let h: f64 = 1e-3;
    let mut s = 0.5;
    let mut t = h;
    loop {
        let term = (-z * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        s += term;
        if term < 1e-18 * s {
            break;
        }
        t += h;
    }
    -z + (s * h).ln()
}

/// Standard normal CDF from the series `1/2 + phi(x) sum x^(2k+1) / (2k+1)!!`,
/// adequate for moderate `|x|`.
pub fn normal_cdf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
    }
    0.5 + (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * sum
}

/// `(X'X + diag(delta))^-1` through an LU decomposition.
pub fn dense_inverse(x: &DMatrix<f64>, delta: &DVector<f64>) -> DMatrix<f64> {
    let mut a = x.transpose() * x;
    for j in 0..delta.len() {
        a[(j, j)] += delta[j];
    }
    a.lu().try_inverse().expect("invertible")
}

/// `log |(X'X + diag(delta))^-1|` from the LU factors.
pub fn dense_logdet_inverse(x: &DMatrix<f64>, delta: &DVector<f64>) -> f64 {
    let mut a = x.transpose() * x;
    for j in 0..delta.len() {
        a[(j, j)] += delta[j];
    }
    let lu = a.lu();
    -lu.u().diagonal().iter().map(|d| d.abs().ln()).sum::<f64>()
}

/// Two-sided Kolmogorov-Smirnov distance of a sample against a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(draws: &mut [f64], cdf: F) -> f64 {
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = draws.len() as f64;
    draws.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Accelerated proximal gradient on the DSS objective.
pub fn proximal_gradient(x: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, w: &[f64]) -> DVector<f64> {
    let n = x.nrows() as f64;
    let gram = x.transpose() * x * (2.0 / n);
    let lin = &gram * b;
    let top = SymmetricEigen::new(gram.clone()).eigenvalues.max();
    let step = 1.0 / top;
    let mut theta = DVector::zeros(b.len());
    let mut prev = theta.clone();
    let mut t = 1.0f64;
    for _ in 0..2_000_000 {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let v = &theta + (&theta - &prev) * ((t - 1.0) / t_next);
        let grad = &gram * &v - &lin;
        let next = DVector::from_fn(b.len(), |j, _| soft(v[j] - step * grad[j], step * lambda * w[j]));
        prev = std::mem::replace(&mut theta, next);
        t = t_next;
        if (&theta - &prev).amax() < 1e-14 {
            break;
        }
    }
    theta
}
