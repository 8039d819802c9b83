//! Reference computations written independently of the library: finite
//! differences, quadrature over the 1-D truncated Gaussian, and the step-size
//! calculator evaluated from first principles.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Absolute error allowance for the quadrature values (Simpson with 20k
/// panels on a smooth integrand is accurate far below this).
pub const QUADRATURE_ERR: f64 = 1e-10;

/// Monte-Carlo and quadrature uncertainty combined.
pub fn combined_se(mc_se: f64) -> f64 {
    mc_se.hypot(QUADRATURE_ERR)
}

/// Exact moments of `g = m + z` with `z ~ N(0, s^2)` conditioned on
/// `|z| <= sigma`.
#[derive(Debug, Clone, Copy)]
pub struct TruncOracle {
    /// `P(|g| <= alpha)`
    pub probability: f64,
    /// `E[g 1(|g| <= alpha)]`
    pub truncated_mean: f64,
    /// `E[g 1] / (P m)`, undefined for `m = 0`.
    pub c: Option<f64>,
}

pub fn trunc_oracle_1d(mean_shift: f64, alpha: f64, sigma: f64, inner_std: f64) -> TruncOracle {
    let s = inner_std;
    let phi = |z: f64| (-(z * z) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
    let n = 20_000;
    let z_norm = simpson(phi, -sigma, sigma, n);
    let lo = (-alpha - mean_shift).max(-sigma);
    let hi = (alpha - mean_shift).min(sigma);
    let probability = simpson(phi, lo, hi, n) / z_norm;
    let truncated_mean = simpson(|z| (mean_shift + z) * phi(z), lo, hi, n) / z_norm;
    let c = (mean_shift != 0.0).then(|| truncated_mean / (probability * mean_shift));
    TruncOracle {
        probability,
        truncated_mean,
        c,
    }
}

/// Step-size calculator at `c = 1/2`, evaluated directly from its formulas.
#[derive(Debug, Clone, Copy)]
pub struct PlanOracle {
    pub a: f64,
    pub b: f64,
    pub interval_max: f64,
    pub gamma_max: f64,
    pub eta: f64,
    pub iterations: f64,
    pub epsilon_bound: f64,
    pub workers_bound: f64,
}

pub fn plan_oracle(
    eps: f64,
    n: f64,
    sigma: f64,
    l0: f64,
    l1: f64,
    delta: f64,
    c_min: f64,
) -> PlanOracle {
    let c: f64 = 0.5;
    let b = (c.exp() - 1.0) / c;
    let a = 1.0 + c.exp() - b;
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    let epsilon_bound = ratio(a * l0, b * l1).min(0.1);
    let workers_bound = (1.0 / eps).min(ratio(14.0 * a * l0, 5.0 * b * l1 * eps));
    let interval_max = ((1.0 / c_min).sqrt() * sigma / (n * eps) + 1e-9).floor();
    let gamma_max = c_min * n * eps / (28.0 * sigma) * (eps / (a * l0)).min(ratio(1.0, b * l1));
    let eta = gamma_max / (5.0 * sigma);
    let iterations =
        (560.0 * a * l0 * delta * sigma * sigma / (c_min * c_min * n * eps.powi(4))).ceil();
    PlanOracle {
        a,
        b,
        interval_max,
        gamma_max,
        eta,
        iterations,
        epsilon_bound,
        workers_bound,
    }
}

/// Relative agreement to `digits` significant digits.
pub fn same_sig_digits(x: f64, y: f64, digits: i32) -> bool {
    if x == y {
        return true;
    }
    let scale = x.abs().max(y.abs());
    (x - y).abs() <= 0.5 * 10f64.powi(1 - digits) * scale
}
