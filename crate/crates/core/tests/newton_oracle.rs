//! Backward Euler step on a 3-cell system against nested bisection.

use std::sync::Arc;

use flab_core::nonlinearity::{DiffusionLaw, Nonlinearity};
use flab_core::{step_backward_euler, BoxMesh, Field, SolverConfig};

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "bracket [{lo}, {hi}] does not straddle a root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves U_i − U⁰_i − dt (LΦ(U))_i = 0 on three cells with unit spacing
/// by bisection on U_0; U_1 and U_2 follow from the first and last rows.
fn oracle(nl: &Nonlinearity, u0: [f64; 3], dt: f64) -> [f64; 3] {
    let lo = u0.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let complete = |a: f64| {
        // row 0: a − a0 − dt (φ(b) − φ(a)) = 0
        let target = nl.phi(a) + (a - u0[0]) / dt;
        let b = bisect(lo - 10.0, hi + 10.0, |b| nl.phi(b) - target);
        // row 2: c − c0 − dt (φ(b) − φ(c)) = 0
        let c = bisect(lo - 10.0, hi + 10.0, |c| c - u0[2] - dt * (nl.phi(b) - nl.phi(c)));
        [a, b, c]
    };
    let total: f64 = u0.iter().sum();
    let a = bisect(lo, hi, |a| complete(a).iter().sum::<f64>() - total);
    complete(a)
}

fn check(nl: &Nonlinearity, u0: [f64; 3], dt: f64) {
    let mesh = Arc::new(BoxMesh::interval(0.0, 3.0, 3).unwrap());
    let f = Field::new(mesh, u0.to_vec(), 0.0).unwrap();
    let mut cfg = SolverConfig::new(dt, dt, 1.0);
    cfg.newton_tol = Some(1e-13);
    let (g, rep) = step_backward_euler(&f, nl, dt, &cfg).unwrap();
    let want = oracle(nl, u0, dt);
    for (got, want) in g.values().iter().zip(want) {
        assert!((got - want).abs() <= 1e-8, "{got} vs {want} (iters {})", rep.newton_iters);
    }
    assert!(rep.final_residual <= 1e-13);
}

#[test]
fn pure_power_bump() {
    let nl = Nonlinearity::pure_power(2.0, 1.0).unwrap();
    check(&nl, [0.0, 1.0, 0.0], 0.1);
}

#[test]
fn asymmetric_and_two_power() {
    let pm = Nonlinearity::pure_power(2.0, 1.0).unwrap();
    check(&pm, [0.2, 1.5, -0.4], 0.3);
    let tp = Nonlinearity::two_power(3.0, 2.0, 0.5, 2.0, 1.0).unwrap();
    check(&tp, [0.0, 3.0, 0.1], 0.05);
    check(&tp, [-1.0, 0.7, 2.5], 1.0);
}
