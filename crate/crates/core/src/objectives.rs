//! Synthetic (L0, L1)-smooth objectives with closed-form derivatives.
//!
//! Every objective here has a diagonal Hessian, so the spectral norm is the
//! largest absolute diagonal entry.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::noise::RngStream;
use crate::vecmath::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// `sum_i x_i^4`
    Quartic,
    /// `0.5 * ||x||^2`
    Quadratic,
    /// `cosh(a x) / a^2`, one-dimensional.
    Exp1d { a: f64 },
}

/// A synthetic objective together with its declared (L0, L1) constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    kind: ObjectiveKind,
    dim: usize,
    l0: f64,
    l1: f64,
}

pub fn make_quartic(dim: usize) -> Result<ObjectiveSpec> {
    check_dim(dim)?;
    Ok(ObjectiveSpec {
        kind: ObjectiveKind::Quartic,
        dim,
        l0: 12.0,
        l1: 3.0,
    })
}

pub fn make_quadratic(dim: usize) -> Result<ObjectiveSpec> {
    check_dim(dim)?;
    Ok(ObjectiveSpec {
        kind: ObjectiveKind::Quadratic,
        dim,
        l0: 1.0,
        l1: 0.0,
    })
}

/// `f(x) = cosh(a x) / a^2`. Since `f'' = cosh(a x)` and
/// `cosh(u) - |sinh(u)| = exp(-|u|) <= 1`, it is (1, a)-smooth.
pub fn make_exp1d(a: f64) -> Result<ObjectiveSpec> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    Ok(ObjectiveSpec {
        kind: ObjectiveKind::Exp1d { a },
        dim: 1,
        l0: 1.0,
        l1: a,
    })
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    Ok(())
}

impl ObjectiveSpec {
    /// Resolves a config name: "quartic", "quadratic" or "exp1d".
    pub fn from_name(name: &str, dim: usize, a: Option<f64>) -> Result<Self> {
        match name {
            "quartic" => make_quartic(dim),
            "quadratic" => make_quadratic(dim),
            "exp1d" => {
                if dim != 1 {
                    return Err(Error::param("dim", "exp1d is one-dimensional"));
                }
                make_exp1d(a.unwrap_or(1.0))
            }
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }

    /// Replaces the declared constants, e.g. to exercise the certifier with a
    /// deliberately wrong declaration.
    pub fn with_declared_constants(mut self, l0: f64, l1: f64) -> Self {
        self.l0 = l0;
        self.l1 = l1;
        self
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ObjectiveKind::Quartic => "quartic",
            ObjectiveKind::Quadratic => "quadratic",
            ObjectiveKind::Exp1d { .. } => "exp1d",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn f_star(&self) -> f64 {
        match self.kind {
            ObjectiveKind::Quartic | ObjectiveKind::Quadratic => 0.0,
            ObjectiveKind::Exp1d { a } => 1.0 / (a * a),
        }
    }

    /// Radius of the ball inside which the certificate is checked by default.
    pub fn default_test_radius(&self) -> f64 {
        match self.kind {
            ObjectiveKind::Exp1d { .. } => 3.0,
            _ => 5.0,
        }
    }

    pub fn value(&self, x: &ParamVector) -> f64 {
        let x = x.as_slice();
        match self.kind {
            ObjectiveKind::Quartic => x.iter().map(|v| v.powi(4)).sum(),
            ObjectiveKind::Quadratic => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            ObjectiveKind::Exp1d { a } => (a * x[0]).cosh() / (a * a),
        }
    }

    pub fn gradient(&self, x: &ParamVector) -> ParamVector {
        let g = match self.kind {
            ObjectiveKind::Quartic => x.as_slice().iter().map(|v| 4.0 * v.powi(3)).collect(),
            ObjectiveKind::Quadratic => x.as_slice().to_vec(),
            ObjectiveKind::Exp1d { a } => vec![(a * x[0]).sinh() / a],
        };
        ParamVector::from_raw(g)
    }

    pub fn hessian_spectral_norm(&self, x: &ParamVector) -> f64 {
        match self.kind {
            ObjectiveKind::Quartic => 12.0 * x.as_slice().iter().map(|v| v * v).fold(0.0, f64::max),
            ObjectiveKind::Quadratic => 1.0,
            ObjectiveKind::Exp1d { a } => (a * x[0]).cosh(),
        }
    }

    pub(crate) fn check_point(&self, x: &ParamVector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(dim={}, L0={}, L1={})",
            self.name(),
            self.dim,
            self.l0,
            self.l1
        )
    }
}

/// Uniform sample from the Euclidean ball of `radius` around the origin.
pub fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> ParamVector {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / dim as f64);
        return ParamVector::from_raw(dir.into_iter().map(|v| v * r / n).collect());
    }
}

/// Outcome of checking `||hess f(x)|| <= L0 + L1 ||grad f(x)||` on samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessCertificate {
    pub objective: String,
    pub l0: f64,
    pub l1: f64,
    pub radius: f64,
    pub samples: usize,
    /// Largest `(||hess|| - L0) / ||grad||` seen where the gradient is nonzero.
    pub max_ratio: Option<f64>,
    pub violations: usize,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

/// Samples uniformly from the ball and checks the relaxed-smoothness
/// inequality at every sample.
pub fn certify_smoothness(
    obj: &ObjectiveSpec,
    ball_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SmoothnessCertificate> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    if !(ball_radius > 0.0 && ball_radius.is_finite()) {
        return Err(Error::param("ball_radius", "must be positive"));
    }
    let mut max_ratio: Option<f64> = None;
    let mut violations = 0;
    let mut diagnostics = Vec::new();
    for k in 0..samples {
        let mut rng = RngStream::new(seed, 0, k as u64).rng();
        let x = sample_in_ball(&mut rng, obj.dim(), ball_radius);
        let h = obj.hessian_spectral_norm(&x);
        let gn = obj.gradient(&x).norm();
        if !h.is_finite() || !gn.is_finite() {
            violations += 1;
            diagnostics.push(format!(
                "sample {k}: non-finite evaluator output (hess={h}, grad={gn}) at {:?}",
                x.as_slice()
            ));
            continue;
        }
        if gn > 0.0 {
            let r = (h - obj.l0()) / gn;
            max_ratio = Some(max_ratio.map_or(r, |m| m.max(r)));
        }
        if h > obj.l0() + obj.l1() * gn {
            violations += 1;
            if diagnostics.len() < 8 {
                diagnostics.push(format!(
                    "sample {k}: ||hess||={h} > {} + {}*{gn}",
                    obj.l0(),
                    obj.l1()
                ));
            }
        }
    }
    Ok(SmoothnessCertificate {
        objective: obj.name().to_string(),
        l0: obj.l0(),
        l1: obj.l1(),
        radius: ball_radius,
        samples,
        max_ratio,
        violations,
        pass: violations == 0,
        diagnostics,
    })
}

/// `||grad f(x') - grad f(x)|| / ||x' - x||`.
pub fn local_smoothness_estimate(
    obj: &ObjectiveSpec,
    x: &ParamVector,
    x_prime: &ParamVector,
) -> Result<f64> {
    obj.check_point(x)?;
    obj.check_point(x_prime)?;
    let dist = x.distance(x_prime);
    if dist == 0.0 {
        return Err(Error::Precondition("x and x' coincide".into()));
    }
    Ok(obj.gradient(x_prime).sub(&obj.gradient(x)).norm() / dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quartic_examples() {
        let q = make_quartic(1).unwrap();
        let x = pv(&[2.0]);
        assert_eq!(q.value(&x), 16.0);
        assert_eq!(q.gradient(&x), pv(&[32.0]));
        assert_eq!(q.hessian_spectral_norm(&x), 48.0);
        assert!(48.0 <= q.l0() + q.l1() * 32.0);

        let z = pv(&[0.0]);
        assert_eq!(q.value(&z), 0.0);
        assert_eq!(q.gradient(&z).norm(), 0.0);
        assert_eq!(q.hessian_spectral_norm(&z), 0.0);

        let q2 = make_quartic(2).unwrap();
        let x = pv(&[1.0, -1.0]);
        assert_eq!(q2.value(&x), 2.0);
        assert_eq!(q2.gradient(&x), pv(&[4.0, -4.0]));
        assert!((q2.gradient(&x).norm() - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(q2.hessian_spectral_norm(&x), 12.0);
    }

    #[test]
    fn quadratic_examples() {
        let q = make_quadratic(2).unwrap();
        assert_eq!(q.value(&pv(&[3.0, 4.0])), 12.5);
        assert_eq!(q.gradient(&pv(&[3.0, 4.0])), pv(&[3.0, 4.0]));
        assert_eq!(q.value(&pv(&[0.0, 0.0])), 0.0);
        assert_eq!(q.hessian_spectral_norm(&pv(&[-9.0, 2.0])), 1.0);
        assert_eq!((q.l0(), q.l1(), q.f_star()), (1.0, 0.0, 0.0));
    }

    #[test]
    fn exp1d_examples() {
        let e = make_exp1d(1.0).unwrap();
        let z = pv(&[0.0]);
        assert_eq!(e.value(&z), 1.0);
        assert_eq!(e.gradient(&z).norm(), 0.0);
        assert_eq!(e.hessian_spectral_norm(&z), 1.0);

        let x = pv(&[2.0]);
        let g = e.gradient(&x)[0];
        let h = e.hessian_spectral_norm(&x);
        assert!((g - 3.626_860_407_847_019).abs() < 1e-12);
        assert!((h - 3.762_195_691_083_631).abs() < 1e-12);
        assert!(h <= 1.0 + g);

        let e2 = make_exp1d(2.0).unwrap();
        assert_eq!(e2.f_star(), 0.25);
        let cert = certify_smoothness(&e2, 1.0, 500, 3).unwrap();
        assert!(cert.pass);
        assert!((e2.hessian_spectral_norm(&pv(&[1.0])) - 2f64.cosh()).abs() < 1e-12);

        assert!(make_exp1d(0.0).is_err());
        assert!(make_exp1d(-1.0).is_err());
    }

    #[test]
    fn from_name_resolves() {
        assert_eq!(
            ObjectiveSpec::from_name("quartic", 3, None).unwrap().dim(),
            3
        );
        assert!(ObjectiveSpec::from_name("exp1d", 2, None).is_err());
        assert!(ObjectiveSpec::from_name("rosenbrock", 2, None).is_err());
        assert!(make_quartic(0).is_err());
    }

    #[test]
    fn certificates() {
        let q = make_quartic(4).unwrap();
        let c = certify_smoothness(&q, 5.0, 2000, 11).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(c.max_ratio.unwrap() <= 3.0);

        let bad = make_quadratic(3).unwrap().with_declared_constants(0.5, 0.0);
        let c = certify_smoothness(&bad, 5.0, 100, 1).unwrap();
        assert!(!c.pass);
        assert_eq!(c.violations, 100);

        let e = make_exp1d(1.0).unwrap();
        assert!(certify_smoothness(&e, 3.0, 2000, 5).unwrap().pass);

        assert!(certify_smoothness(&q, 5.0, 0, 1).is_err());
        assert!(certify_smoothness(&q, 0.0, 10, 1).is_err());
    }

    #[test]
    fn certificate_flags_non_finite() {
        let e = make_exp1d(1.0).unwrap();
        let c = certify_smoothness(&e, 1e6, 50, 2).unwrap();
        assert!(!c.pass);
        assert!(c.diagnostics.iter().any(|d| d.contains("non-finite")));
    }

    #[test]
    fn local_smoothness_examples() {
        let q = make_quadratic(3).unwrap();
        let est = local_smoothness_estimate(&q, &pv(&[1.0, 2.0, 3.0]), &pv(&[0.0, -1.0, 5.0]));
        assert!((est.unwrap() - 1.0).abs() < 1e-12);

        let q1 = make_quartic(1).unwrap();
        let est = local_smoothness_estimate(&q1, &pv(&[0.1]), &pv(&[0.1 + 1e-4])).unwrap();
        // secant slope 12x^2 + 12xh + 4h^2 ~ 0.12012
        assert!((est - 0.12).abs() < 2e-4);
        assert!((est - (0.12 + 12.0 * 0.1 * 1e-4 + 4e-8)).abs() < 1e-9);

        let est = local_smoothness_estimate(&q1, &pv(&[1.0]), &pv(&[1.1])).unwrap();
        assert!((est - 13.24).abs() < 1e-9);

        assert!(local_smoothness_estimate(&q1, &pv(&[1.0]), &pv(&[1.0])).is_err());
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = RngStream::new(9, 0, 0).rng();
        for _ in 0..1000 {
            assert!(sample_in_ball(&mut rng, 5, 2.0).norm() <= 2.0 + 1e-12);
        }
    }
}
