//! Executable versions of the inequalities the convergence analysis relies
//! on, the hyperparameter calculator, and the Monte-Carlo fit of the
//! truncated-expectation identity `E[g 1(||g|| <= a)] = P(||g|| <= a) diag(c) E[g]`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, RngStream};
use crate::objectives::{sample_in_ball, ObjectiveSpec};
use crate::vecmath::ParamVector;

/// Slack used by the inequality checks on objectives.
pub const INEQUALITY_SLACK: f64 = 1e-8;

/// Slack used by the mu-inequality check.
pub const MU_SLACK: f64 = 1e-10;

/// The constant `c` in `2 gamma I <= c / L1` used by the calculator.
pub const PLAN_C: f64 = 0.5;

/// Minimum number of Monte-Carlo samples for a truncation fit.
pub const MIN_TRUNCATION_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABConstants {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

/// `A = 1 + e^c - (e^c - 1)/c`, `B = (e^c - 1)/c`.
pub fn ab_constants(c: f64) -> Result<ABConstants> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    // expm1 keeps (e^c - 1)/c accurate as c -> 0.
    let b = c.exp_m1() / c;
    let a = 1.0 + c.exp() - b;
    Ok(ABConstants { c, a, b })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanInputs {
    pub epsilon: f64,
    pub workers: usize,
    pub sigma: f64,
    pub l0: f64,
    pub l1: f64,
    pub delta: f64,
    pub c_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanFlags {
    /// `sigma >= 1`
    pub sigma_at_least_one: bool,
    /// `epsilon <= min(A L0 / (B L1), 0.1)`
    pub epsilon_admissible: bool,
    /// `N <= min(1/epsilon, 14 A L0 / (5 B L1 epsilon))`
    pub workers_admissible: bool,
    /// `c_min <= 1`
    pub c_min_admissible: bool,
    /// `I_max >= 1`
    pub interval_admissible: bool,
}

impl PlanFlags {
    pub fn feasible(&self) -> bool {
        self.sigma_at_least_one
            && self.epsilon_admissible
            && self.workers_admissible
            && self.c_min_admissible
            && self.interval_admissible
    }

    /// Names of the violated preconditions.
    pub fn violated(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.sigma_at_least_one {
            v.push("sigma >= 1");
        }
        if !self.epsilon_admissible {
            v.push("epsilon <= min(A*L0/(B*L1), 0.1)");
        }
        if !self.workers_admissible {
            v.push("N <= min(1/epsilon, 14*A*L0/(5*B*L1*epsilon))");
        }
        if !self.c_min_admissible {
            v.push("c_min <= 1");
        }
        if !self.interval_admissible {
            v.push("I_max >= 1");
        }
        v
    }
}

/// Hyperparameters prescribed by the convergence guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremOnePlan {
    pub inputs: PlanInputs,
    pub ab: ABConstants,
    pub epsilon_bound: f64,
    pub workers_bound: f64,
    pub interval_max: u64,
    pub gamma_max: f64,
    /// `gamma_max / (5 sigma)`
    pub eta: f64,
    /// `ceil(560 A L0 Delta sigma^2 / (c_min^2 N epsilon^4))`
    pub iterations: f64,
    pub flags: PlanFlags,
}

impl TheoremOnePlan {
    /// `(eta, gamma)` with gamma scaled by `factor` and `gamma / eta = 5 sigma`
    /// preserved.
    pub fn scaled_steps(&self, factor: f64) -> (f64, f64) {
        let gamma = self.gamma_max * factor;
        (gamma / (5.0 * self.inputs.sigma), gamma)
    }

    /// Whether `2 gamma I <= c / L1` with `c = 1/2` (vacuous when `L1 = 0`).
    pub fn consensus_radius_ok(&self, gamma: f64, interval: u64) -> bool {
        self.inputs.l1 <= 0.0 || 2.0 * gamma * interval as f64 <= PLAN_C / self.inputs.l1
    }
}

/// Evaluates the step-size, interval and horizon prescriptions at `c = 1/2`.
/// Infeasible inputs still produce a plan with the violated flags cleared.
pub fn theorem1_plan(inp: PlanInputs) -> Result<TheoremOnePlan> {
    let positive = |name: &'static str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::param(name, format!("must be positive, got {v}")))
        }
    };
    positive("epsilon", inp.epsilon)?;
    positive("sigma", inp.sigma)?;
    positive("l0", inp.l0)?;
    positive("delta", inp.delta)?;
    positive("c_min", inp.c_min)?;
    if inp.workers == 0 {
        return Err(Error::param("workers", "must be at least 1"));
    }
    if !(inp.l1 >= 0.0 && inp.l1.is_finite()) {
        return Err(Error::param(
            "l1",
            format!("must be nonnegative, got {}", inp.l1),
        ));
    }

    let ab = ab_constants(PLAN_C)?;
    let (a, b) = (ab.a, ab.b);
    let n = inp.workers as f64;
    let eps = inp.epsilon;

    // L1 = 0 turns the L1-dependent bounds into +inf.
    let ratio_bound = if inp.l1 > 0.0 {
        a * inp.l0 / (b * inp.l1)
    } else {
        f64::INFINITY
    };
    let epsilon_bound = ratio_bound.min(0.1);
    let workers_bound = (1.0 / eps).min(if inp.l1 > 0.0 {
        14.0 * a * inp.l0 / (5.0 * b * inp.l1 * eps)
    } else {
        f64::INFINITY
    });

    let interval_raw = (1.0 / inp.c_min).sqrt() * inp.sigma / (n * eps);
    // Absorb rounding so exact integers (e.g. 1/(4*0.25)) are not floored down.
    let interval_max = (interval_raw * (1.0 + 1e-12)).floor() as u64;

    let inv_bl1 = if inp.l1 > 0.0 {
        1.0 / (b * inp.l1)
    } else {
        f64::INFINITY
    };
    let gamma_max = inp.c_min * n * eps / (28.0 * inp.sigma) * (eps / (a * inp.l0)).min(inv_bl1);
    let eta = gamma_max / (5.0 * inp.sigma);
    let iterations = (560.0 * a * inp.l0 * inp.delta * inp.sigma * inp.sigma
        / (inp.c_min * inp.c_min * n * eps.powi(4)))
    .ceil();

    let flags = PlanFlags {
        sigma_at_least_one: inp.sigma >= 1.0,
        epsilon_admissible: eps <= epsilon_bound,
        workers_admissible: n <= workers_bound,
        c_min_admissible: inp.c_min <= 1.0,
        interval_admissible: interval_max >= 1,
    };

    Ok(TheoremOnePlan {
        inputs: inp,
        ab,
        epsilon_bound,
        workers_bound,
        interval_max,
        gamma_max,
        eta,
        iterations,
        flags,
    })
}

/// `-<u,v>/||v|| <= -mu ||u|| - (1 - mu) ||v|| + (1 + mu) ||v - u||`.
pub fn check_mu_inequality(u: &ParamVector, v: &ParamVector, mu: f64) -> Result<bool> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            actual: u.dim(),
        });
    }
    if !(mu >= 0.0) {
        return Err(Error::param("mu", format!("must be nonnegative, got {mu}")));
    }
    let vn = v.norm();
    if vn == 0.0 {
        return Err(Error::Precondition("v must be nonzero".into()));
    }
    let lhs = -u.dot(v) / vn;
    let rhs = -mu * u.norm() - (1.0 - mu) * vn + (1.0 + mu) * v.distance(u);
    Ok(lhs <= rhs + MU_SLACK)
}

fn admissible_pair(obj: &ObjectiveSpec, x: &ParamVector, xp: &ParamVector, c: f64) -> Result<f64> {
    obj.check_point(x)?;
    obj.check_point(xp)?;
    if !(c > 0.0) {
        return Err(Error::param("c", "must be positive"));
    }
    let dist = x.distance(xp);
    if obj.l1() > 0.0 && dist > c / obj.l1() {
        return Err(Error::Precondition(format!(
            "||x' - x|| = {dist} exceeds c / L1 = {}",
            c / obj.l1()
        )));
    }
    Ok(dist)
}

/// `f(x') <= f(x) + <grad f(x), x' - x> + (A L0 + B L1 ||grad f(x)||)/2 ||x' - x||^2`.
pub fn check_descent_inequality(
    obj: &ObjectiveSpec,
    x: &ParamVector,
    xp: &ParamVector,
    c: f64,
) -> Result<bool> {
    let dist = admissible_pair(obj, x, xp, c)?;
    let ab = ab_constants(c)?;
    let g = obj.gradient(x);
    let curvature = ab.a * obj.l0() + ab.b * obj.l1() * g.norm();
    let rhs = obj.value(x) + g.dot(&xp.sub(x)) + 0.5 * curvature * dist * dist;
    Ok(obj.value(xp) <= rhs + INEQUALITY_SLACK)
}

/// `||grad f(x') - grad f(x)|| <= (A L0 + B L1 ||grad f(x)||) ||x' - x||`.
pub fn check_gradient_difference(
    obj: &ObjectiveSpec,
    x: &ParamVector,
    xp: &ParamVector,
    c: f64,
) -> Result<bool> {
    let dist = admissible_pair(obj, x, xp, c)?;
    let ab = ab_constants(c)?;
    let g = obj.gradient(x);
    let lhs = obj.gradient(xp).sub(&g).norm();
    let rhs = (ab.a * obj.l0() + ab.b * obj.l1() * g.norm()) * dist;
    Ok(lhs <= rhs + INEQUALITY_SLACK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub objective: String,
    pub pairs: usize,
    pub descent_violations: usize,
    pub gradient_difference_violations: usize,
    pub counterexamples: Vec<String>,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.descent_violations == 0 && self.gradient_difference_violations == 0
    }
}

/// Random admissible pair: `x` uniform in the ball of `radius`, `x'` at a
/// uniform distance in `[0, c / L1]` (or `[0, radius]` when `L1 = 0`) in a
/// uniform direction.
pub fn random_admissible_pair<R: Rng + ?Sized>(
    rng: &mut R,
    obj: &ObjectiveSpec,
    radius: f64,
    c: f64,
) -> (ParamVector, ParamVector) {
    let x = sample_in_ball(rng, obj.dim(), radius);
    let reach = if obj.l1() > 0.0 { c / obj.l1() } else { radius };
    let mut dir = sample_in_ball(rng, obj.dim(), 1.0);
    while dir.norm() == 0.0 {
        dir = sample_in_ball(rng, obj.dim(), 1.0);
    }
    let len = reach * rng.random::<f64>() * (1.0 - 1e-12);
    let mut xp = x.clone();
    xp.add_scaled(len / dir.norm(), &dir);
    (x, xp)
}

/// Checks the descent inequality and the gradient-difference bound on
/// `pairs` random admissible pairs.
pub fn inequality_suite(
    obj: &ObjectiveSpec,
    pairs: usize,
    c: f64,
    radius: f64,
    seed: u64,
) -> Result<InequalityReport> {
    ab_constants(c)?;
    let mut report = InequalityReport {
        objective: obj.name().to_string(),
        pairs,
        descent_violations: 0,
        gradient_difference_violations: 0,
        counterexamples: Vec::new(),
    };
    for k in 0..pairs {
        let mut rng = RngStream::new(seed, 1, k as u64).rng();
        let (x, xp) = random_admissible_pair(&mut rng, obj, radius, c);
        let descent = check_descent_inequality(obj, &x, &xp, c)?;
        let diff = check_gradient_difference(obj, &x, &xp, c)?;
        if !descent {
            report.descent_violations += 1;
        }
        if !diff {
            report.gradient_difference_violations += 1;
        }
        if (!descent || !diff) && report.counterexamples.len() < 8 {
            report.counterexamples.push(format!(
                "x={:?} x'={:?} descent={descent} gradient_difference={diff}",
                x.as_slice(),
                xp.as_slice()
            ));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuReport {
    pub triples: usize,
    pub violations: usize,
    pub counterexamples: Vec<String>,
}

/// `triples` random `(u, v, mu)` with dims in 1..=8 and `mu` in [0, 1].
pub fn mu_inequality_suite(triples: usize, seed: u64) -> Result<MuReport> {
    let mut report = MuReport {
        triples,
        violations: 0,
        counterexamples: Vec::new(),
    };
    for k in 0..triples {
        let mut rng = RngStream::new(seed, 2, k as u64).rng();
        let dim = rng.random_range(1..=8usize);
        let scale_u = 10f64.powf(rng.random_range(-2.0..2.0));
        let scale_v = 10f64.powf(rng.random_range(-2.0..2.0));
        let u = sample_in_ball(&mut rng, dim, scale_u);
        let mut v = sample_in_ball(&mut rng, dim, scale_v);
        while v.norm() == 0.0 {
            v = sample_in_ball(&mut rng, dim, scale_v);
        }
        let mu: f64 = rng.random_range(0.0..=1.0);
        if !check_mu_inequality(&u, &v, mu)? {
            report.violations += 1;
            if report.counterexamples.len() < 8 {
                report.counterexamples.push(format!(
                    "u={:?} v={:?} mu={mu}",
                    u.as_slice(),
                    v.as_slice()
                ));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateFit {
    pub index: usize,
    /// Sample mean of `g_i`.
    pub mean: f64,
    /// Standard error of the sample mean of `g_i`.
    pub mean_se: f64,
    /// Estimate of `E[g_i 1(||g|| <= alpha)]`.
    pub truncated_mean: f64,
    pub truncated_mean_se: f64,
    /// Fitted `c_i`; `None` when `|E[g_i]|` is within the noise floor.
    pub c: Option<f64>,
    pub c_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub alpha: f64,
    pub samples: usize,
    /// Estimate of `P(||g|| <= alpha)`.
    pub probability: f64,
    pub probability_se: f64,
    pub coords: Vec<CoordinateFit>,
    /// Norm of the truncated means over the coordinates that could not be
    /// fitted (zero mean), which should vanish by symmetry.
    pub residual_norm: f64,
    /// No coordinate has a mean above the noise floor.
    pub symmetric_zero: bool,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

impl TruncationReport {
    pub fn fitted_c_min(&self) -> Option<f64> {
        self.coords
            .iter()
            .filter_map(|c| c.c)
            .fold(None, |m, c| Some(m.map_or(c, |m: f64| m.min(c))))
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    n: usize,
    inside: usize,
    sum_g: Vec<f64>,
    sum_g2: Vec<f64>,
    sum_y: Vec<f64>,
    sum_y2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            n: 0,
            inside: 0,
            sum_g: vec![0.0; dim],
            sum_g2: vec![0.0; dim],
            sum_y: vec![0.0; dim],
            sum_y2: vec![0.0; dim],
        }
    }

    fn merge(mut self, o: &Moments) -> Self {
        self.n += o.n;
        self.inside += o.inside;
        for (dst, src) in [
            (&mut self.sum_g, &o.sum_g),
            (&mut self.sum_g2, &o.sum_g2),
            (&mut self.sum_y, &o.sum_y),
            (&mut self.sum_y2, &o.sum_y2),
        ] {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        self
    }
}

const MC_CHUNK: usize = 1 << 15;

/// Monte-Carlo estimate of `E[g 1(||g|| <= alpha)]` and `P(||g|| <= alpha)`
/// for `g = mean_shift + zeta`, with a per-coordinate fit of `c_i`.
///
/// Sample `k` uses stream `(seed, 0, k)`; chunks are reduced in index order so
/// the result does not depend on the thread count.
pub fn truncated_expectation_mc(
    noise: &NoiseModel,
    mean_shift: &ParamVector,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<TruncationReport> {
    if samples < MIN_TRUNCATION_SAMPLES {
        return Err(Error::param(
            "samples",
            format!("need at least {MIN_TRUNCATION_SAMPLES}, got {samples}"),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(
            "alpha",
            format!("must be positive, got {alpha}"),
        ));
    }
    mean_shift.check_finite()?;
    let dim = mean_shift.dim();
    let sampler = noise.sampler(dim)?;
    let alpha2 = alpha * alpha;

    let chunks: Vec<Moments> = (0..samples.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new(dim);
            let mut zeta = vec![0.0; dim];
            let mut g = vec![0.0; dim];
            for k in (c * MC_CHUNK)..((c + 1) * MC_CHUNK).min(samples) {
                sampler.sample_into(RngStream::new(seed, 0, k as u64), &mut zeta);
                let mut sq = 0.0;
                for i in 0..dim {
                    g[i] = mean_shift[i] + zeta[i];
                    sq += g[i] * g[i];
                }
                m.n += 1;
                let inside = sq <= alpha2;
                if inside {
                    m.inside += 1;
                }
                for (i, &gi) in g.iter().enumerate() {
                    m.sum_g[i] += gi;
                    m.sum_g2[i] += gi * gi;
                    if inside {
                        m.sum_y[i] += gi;
                        m.sum_y2[i] += gi * gi;
                    }
                }
            }
            m
        })
        .collect();
    let m = chunks.iter().fold(Moments::new(dim), |acc, c| acc.merge(c));

    let n = m.n as f64;
    let p = m.inside as f64 / n;
    let p_se = (p * (1.0 - p) / n).sqrt();
    let mut diagnostics = Vec::new();
    let mut pass = true;
    if m.inside == 0 {
        pass = false;
        diagnostics.push(format!(
            "no sample satisfied ||g|| <= {alpha}; alpha too small to estimate P"
        ));
    }

    let mut coords = Vec::with_capacity(dim);
    let mut residual_sq = 0.0;
    for i in 0..dim {
        let mean_g = m.sum_g[i] / n;
        let var_g = (m.sum_g2[i] / n - mean_g * mean_g).max(0.0);
        let mean_se = (var_g / n).sqrt();
        let y = m.sum_y[i] / n;
        let var_y = (m.sum_y2[i] / n - y * y).max(0.0);
        let y_se = (var_y / n).sqrt();
        let cov_yg = m.sum_y2[i] / n - y * mean_g;

        // c_i = E[g_i 1] / (P E[g_i]) with all three expectations replaced by
        // sample means. Sharing the samples between numerator and denominator
        // makes c_i exactly 1 when every sample falls inside the window.
        let identifiable = m.inside > 0 && mean_g.abs() > 5.0 * mean_se;
        let (c, c_se) = if identifiable {
            let c = y / (p * mean_g);
            // Delta method with Z = 1(inside), Y = g_i Z:
            // cov(Y, Z) = y (1 - p), cov(Z, g_i) = y - p E[g_i].
            let a = 1.0 / (p * mean_g);
            let b = -c / p;
            let d = -c / mean_g;
            let var_c = (a * a * var_y
                + b * b * p * (1.0 - p)
                + d * d * var_g
                + 2.0 * a * b * y * (1.0 - p)
                + 2.0 * a * d * cov_yg
                + 2.0 * b * d * (y - p * mean_g))
                / n;
            let se = var_c.max(0.0).sqrt();
            if !(c + 3.0 * se > 0.0 && c - 3.0 * se <= 1.0) {
                pass = false;
                diagnostics.push(format!(
                    "coordinate {i}: fitted c = {c} (se {se}) outside (0, 1]"
                ));
            }
            (Some(c), Some(se))
        } else {
            residual_sq += y * y;
            if y.abs() > 4.0 * y_se {
                pass = false;
                diagnostics.push(format!(
                    "coordinate {i}: zero-mean coordinate has truncated mean {y} \
                     beyond 4 standard errors ({y_se})"
                ));
            }
            (None, None)
        };
        coords.push(CoordinateFit {
            index: i,
            mean: mean_g,
            mean_se,
            truncated_mean: y,
            truncated_mean_se: y_se,
            c,
            c_se,
        });
    }
    let symmetric_zero = coords.iter().all(|c| c.c.is_none());
    if symmetric_zero {
        diagnostics.push(
            "mean shift within the noise floor: diag(c) unidentifiable (symmetric zero case)"
                .into(),
        );
    }

    Ok(TruncationReport {
        alpha,
        samples,
        probability: p,
        probability_se: p_se,
        coords,
        residual_norm: residual_sq.sqrt(),
        symmetric_zero,
        pass,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_exp1d, make_quadratic, make_quartic};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ab_constant_examples() {
        let h = ab_constants(0.5).unwrap();
        assert!((h.a - 1.351_278_7).abs() < 1e-7);
        assert!((h.b - 1.297_442_5).abs() < 1e-7);

        let one = ab_constants(1.0).unwrap();
        assert!((one.a - 2.0).abs() < 1e-12);
        assert!((one.b - (std::f64::consts::E - 1.0)).abs() < 1e-12);

        let tiny = ab_constants(1e-9).unwrap();
        assert!((tiny.a - 1.0).abs() < 1e-8);
        assert!((tiny.b - 1.0).abs() < 1e-8);

        assert!(ab_constants(0.0).is_err());
        assert!(ab_constants(-0.5).is_err());
    }

    #[test]
    fn ab_constants_increase_in_c() {
        let grid: Vec<f64> = (1..=200).map(|k| k as f64 * 0.01).collect();
        for w in grid.windows(2) {
            let lo = ab_constants(w[0]).unwrap();
            let hi = ab_constants(w[1]).unwrap();
            assert!(hi.a > lo.a && hi.b > lo.b, "c = {}", w[1]);
            assert!(lo.a >= 1.0 && lo.b >= 1.0);
        }
    }

    fn worked() -> PlanInputs {
        PlanInputs {
            epsilon: 0.1,
            workers: 4,
            sigma: 1.0,
            l0: 12.0,
            l1: 3.0,
            delta: 1.0,
            c_min: 1.0,
        }
    }

    #[test]
    fn quadratic_plan_has_vacuous_l1_bounds() {
        let p = theorem1_plan(PlanInputs {
            l0: 1.0,
            l1: 0.0,
            epsilon: 0.05,
            workers: 20,
            ..worked()
        })
        .unwrap();
        assert!(p.flags.feasible(), "{:?}", p.flags.violated());
        assert_eq!(p.epsilon_bound, 0.1);
        assert!((p.workers_bound - 20.0).abs() < 1e-9);
        assert!(p.consensus_radius_ok(1e9, 1000));
    }

    #[test]
    fn plan_rejects_nonpositive_inputs() {
        assert!(theorem1_plan(PlanInputs {
            epsilon: 0.0,
            ..worked()
        })
        .is_err());
        assert!(theorem1_plan(PlanInputs {
            workers: 0,
            ..worked()
        })
        .is_err());
        assert!(theorem1_plan(PlanInputs {
            sigma: -1.0,
            ..worked()
        })
        .is_err());
        assert!(theorem1_plan(PlanInputs {
            delta: 0.0,
            ..worked()
        })
        .is_err());
        assert!(theorem1_plan(PlanInputs {
            c_min: 0.0,
            ..worked()
        })
        .is_err());
        assert!(theorem1_plan(PlanInputs {
            l1: -1.0,
            ..worked()
        })
        .is_err());
    }

    #[test]
    fn plan_steps_keep_ratio() {
        let p = theorem1_plan(worked()).unwrap();
        let (eta, gamma) = p.scaled_steps(100.0);
        assert!((gamma / eta - 5.0).abs() < 1e-12);
        assert!((gamma - 100.0 * p.gamma_max).abs() < 1e-15);
        assert!((p.eta * 5.0 - p.gamma_max).abs() < 1e-18);
    }

    #[test]
    fn mu_inequality_cases() {
        let v = pv(&[1.0, -2.0, 0.5]);
        for mu in [0.0, 0.4, 1.0, 3.0] {
            assert!(check_mu_inequality(&v, &v, mu).unwrap());
            assert!(check_mu_inequality(&ParamVector::zeros(3), &v, mu).unwrap());
        }
        assert!(check_mu_inequality(&v, &ParamVector::zeros(3), 0.5).is_err());
        assert!(check_mu_inequality(&v, &v, -0.1).is_err());
        assert!(check_mu_inequality(&pv(&[1.0]), &v, 0.5).is_err());
    }

    #[test]
    fn descent_inequality_cases() {
        let q = make_quadratic(2).unwrap();
        assert!(check_descent_inequality(&q, &pv(&[1.0, 2.0]), &pv(&[-3.0, 0.5]), 0.5).unwrap());

        let q1 = make_quartic(1).unwrap();
        assert!(check_descent_inequality(&q1, &pv(&[1.0]), &pv(&[1.05]), 0.5).unwrap());
        assert!(check_descent_inequality(&q1, &pv(&[1.0]), &pv(&[1.0]), 0.5).unwrap());
        assert!(check_gradient_difference(&q1, &pv(&[1.0]), &pv(&[1.05]), 0.5).unwrap());

        // 0.2 > c / L1 = 1/6
        assert!(matches!(
            check_descent_inequality(&q1, &pv(&[1.0]), &pv(&[1.2]), 0.5),
            Err(Error::Precondition(_))
        ));
        assert!(check_gradient_difference(&q1, &pv(&[1.0]), &pv(&[1.2]), 0.5).is_err());
    }

    #[test]
    fn small_suites_pass() {
        for obj in [
            make_quartic(3).unwrap(),
            make_quadratic(2).unwrap(),
            make_exp1d(1.0).unwrap(),
        ] {
            let r = inequality_suite(&obj, 200, 0.5, obj.default_test_radius(), 4).unwrap();
            assert!(r.pass(), "{r:?}");
        }
        let r = mu_inequality_suite(2000, 1).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
    }

    #[test]
    fn truncation_fit_rejects_bad_inputs() {
        let m = NoiseModel::truncated_gaussian(1.0, None).unwrap();
        assert!(truncated_expectation_mc(&m, &pv(&[0.5]), 1.0, 100, 0).is_err());
        assert!(truncated_expectation_mc(&m, &pv(&[0.5]), 0.0, 20_000, 0).is_err());
    }

    #[test]
    fn truncation_fit_reports_empty_window() {
        // g lies in [4, 6]; nothing falls inside ||g|| <= 1.
        let m = NoiseModel::truncated_gaussian(1.0, None).unwrap();
        let r = truncated_expectation_mc(&m, &pv(&[5.0]), 1.0, 20_000, 0).unwrap();
        assert_eq!(r.probability, 0.0);
        assert!(!r.pass);
        assert!(r.diagnostics[0].contains("alpha too small"));
    }

    #[test]
    fn truncation_fit_multidimensional() {
        let m = NoiseModel::truncated_gaussian(1.0, None).unwrap();
        let r = truncated_expectation_mc(&m, &pv(&[0.5, 0.0, -0.3]), 0.8, 50_000, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.coords[0].c.is_some());
        assert!(r.coords[1].c.is_none());
        assert!(r.coords[2].c.is_some());
        assert!(!r.symmetric_zero);
        let c_min = r.fitted_c_min().unwrap();
        assert!(c_min > 0.0 && c_min <= 1.0 + 1e-2);
    }

    #[test]
    fn truncation_fit_is_thread_count_independent() {
        let m = NoiseModel::truncated_gaussian(1.0, None).unwrap();
        let a = truncated_expectation_mc(&m, &pv(&[0.25]), 0.4, 100_000, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool
            .install(|| truncated_expectation_mc(&m, &pv(&[0.25]), 0.4, 100_000, 9))
            .unwrap();
        assert_eq!(a, b);
    }
}
