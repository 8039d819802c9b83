mod common;

use celgc::objectives::{
    certify_smoothness, make_exp1d, make_quadratic, make_quartic, sample_in_ball,
};
use celgc::{ObjectiveSpec, ParamVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_gradient(obj: &ObjectiveSpec, radius: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = |x: &[f64]| obj.value(&ParamVector::new(x.to_vec()).unwrap());
    for _ in 0..100 {
        let x = sample_in_ball(&mut rng, obj.dim(), radius);
        let g = obj.gradient(&x);
        let fd = common::fd_gradient(f, x.as_slice());
        let err: f64 = g
            .as_slice()
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let rel = err / g.norm().max(1.0);
        assert!(
            rel <= 1e-5,
            "{}: x = {:?}, rel err {rel}",
            obj.name(),
            x.as_slice()
        );
    }
}

#[test]
fn gradients_match_finite_differences() {
    check_gradient(&make_quartic(8).unwrap(), 5.0, 1);
    check_gradient(&make_quartic(1).unwrap(), 5.0, 2);
    check_gradient(&make_quadratic(5).unwrap(), 5.0, 3);
    check_gradient(&make_exp1d(1.0).unwrap(), 3.0, 4);
    check_gradient(&make_exp1d(2.0).unwrap(), 1.5, 5);
}

#[test]
fn hessian_norms_match_second_differences() {
    // all three Hessians are diagonal, so the spectral norm is the largest
    // second partial in absolute value
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for obj in [
        make_quartic(4).unwrap(),
        make_quadratic(3).unwrap(),
        make_exp1d(1.0).unwrap(),
    ] {
        for _ in 0..50 {
            let x = sample_in_ball(&mut rng, obj.dim(), 2.5);
            let mut worst: f64 = 0.0;
            for i in 0..obj.dim() {
                let h = 1e-4;
                let mut xp = x.as_slice().to_vec();
                let mut xm = x.as_slice().to_vec();
                xp[i] += h;
                xm[i] -= h;
                let gp = obj.gradient(&ParamVector::new(xp).unwrap())[i];
                let gm = obj.gradient(&ParamVector::new(xm).unwrap())[i];
                worst = worst.max(((gp - gm) / (2.0 * h)).abs());
            }
            let exact = obj.hessian_spectral_norm(&x);
            assert!(
                (exact - worst).abs() <= 1e-6 * exact.max(1.0),
                "{} {exact} {worst}",
                obj.name()
            );
        }
    }
}

#[test]
fn exp1d_declarations_certify() {
    let c = certify_smoothness(&make_exp1d(1.0).unwrap(), 3.0, 10_000, 5).unwrap();
    assert!(c.pass, "{:?}", c.diagnostics);
    let c = certify_smoothness(&make_exp1d(2.0).unwrap(), 1.5, 10_000, 6).unwrap();
    assert!(c.pass, "{:?}", c.diagnostics);
    // the declared L0 = 1 is tight at the minimum
    let tight = make_exp1d(1.0).unwrap().with_declared_constants(0.9, 1.0);
    assert!(!certify_smoothness(&tight, 0.01, 1000, 5).unwrap().pass);
}

#[test]
fn certificate_is_deterministic_under_seed() {
    let q = make_quartic(3).unwrap();
    let a = certify_smoothness(&q, 5.0, 2000, 42).unwrap();
    let b = certify_smoothness(&q, 5.0, 2000, 42).unwrap();
    assert_eq!(a, b);
}
