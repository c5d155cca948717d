//! Structural properties of the discrete evolution on random data.

use std::sync::Arc;

use flab_core::analysis::lp_norm;
use flab_core::nonlinearity::{DiffusionLaw, Nonlinearity};
use flab_core::solver::RecordSchedule;
use flab_core::{run_observed, BoxMesh, Field, SolverConfig};
use proptest::prelude::*;

fn law() -> Nonlinearity {
    Nonlinearity::two_power(2.5, 1.8, 0.5, 2.0, 1.0).unwrap()
}

fn config() -> SolverConfig {
    // fixed steps so paired runs share the same time levels
    let mut cfg = SolverConfig::new(2e-3, 2e-3, 0.1);
    cfg.records = RecordSchedule::Explicit(vec![0.01, 0.02, 0.04, 0.06, 0.08, 0.1]);
    cfg.newton_tol = Some(1e-12);
    cfg
}

fn evolve(mesh: &Arc<BoxMesh>, values: Vec<f64>) -> Vec<Field> {
    let u0 = Field::new(mesh.clone(), values, 0.0).unwrap();
    let mut snaps = Vec::new();
    run_observed(&u0, &law(), &config(), |f| snaps.push(f.clone())).unwrap();
    snaps
}

fn mesh_1d() -> Arc<BoxMesh> {
    Arc::new(BoxMesh::interval(0.0, 1.0, 32).unwrap())
}

fn mesh_2d() -> Arc<BoxMesh> {
    Arc::new(BoxMesh::new(2, &[1.0, 1.0], &[0.0, 0.0], &[8, 8]).unwrap())
}

fn l1_dist(a: &Field, b: &Field) -> f64 {
    let v = a.mesh().cell_volume();
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() * v
}

fn check_single(snaps: &[Field]) -> Result<(), TestCaseError> {
    let nl = law();
    let first = &snaps[0];
    let mass0 = first.integral();
    let lo = first.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = first.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let energy = |f: &Field| f.values().iter().map(|&u| nl.psi(u)).sum::<f64>() * f.mesh().cell_volume();
    for w in snaps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        prop_assert!((b.integral() - mass0).abs() <= 1e-10 * (1.0 + mass0.abs()));
        for &u in b.values() {
            prop_assert!(u >= lo - 1e-10 && u <= hi + 1e-10);
        }
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let (na, nb) = (lp_norm(a, p).unwrap(), lp_norm(b, p).unwrap());
            prop_assert!(nb <= na * (1.0 + 1e-9) + 1e-12, "p={p}: {na} -> {nb}");
        }
        prop_assert!(energy(b) <= energy(a) * (1.0 + 1e-9) + 1e-12);
    }
    Ok(())
}

fn check_pair(u: &[Field], v: &[Field], ordered: bool) -> Result<(), TestCaseError> {
    let d0 = l1_dist(&u[0], &v[0]);
    let mut prev = d0;
    for (a, b) in u.iter().zip(v).skip(1) {
        let d = l1_dist(a, b);
        prop_assert!(d <= prev * (1.0 + 1e-9) + 1e-12, "{prev} -> {d}");
        prev = d;
        if ordered {
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!(x >= &(y - 1e-10));
            }
        }
    }
    Ok(())
}

fn data(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0_f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn single_run_1d(vals in data(32)) {
        check_single(&evolve(&mesh_1d(), vals))?;
    }

    #[test]
    fn single_run_2d(vals in data(64)) {
        check_single(&evolve(&mesh_2d(), vals))?;
    }

    #[test]
    fn pairs_1d(a in data(32), b in data(32), bump in prop::collection::vec(0.0..1.0_f64, 32)) {
        let m = mesh_1d();
        check_pair(&evolve(&m, a.clone()), &evolve(&m, b), false)?;
        let above: Vec<f64> = a.iter().zip(&bump).map(|(x, d)| x + d).collect();
        check_pair(&evolve(&m, above), &evolve(&m, a), true)?;
    }

    #[test]
    fn pairs_2d(a in data(64), bump in prop::collection::vec(0.0..1.0_f64, 64)) {
        let m = mesh_2d();
        let above: Vec<f64> = a.iter().zip(&bump).map(|(x, d)| x + d).collect();
        check_pair(&evolve(&m, above), &evolve(&m, a), true)?;
    }

    #[test]
    fn zero_mean_stays_zero_mean(vals in data(32)) {
        let m = mesh_1d();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let centred: Vec<f64> = vals.iter().map(|v| v - mean).collect();
        for f in evolve(&m, centred) {
            prop_assert!(f.mean().abs() <= 1e-11);
        }
    }
}
