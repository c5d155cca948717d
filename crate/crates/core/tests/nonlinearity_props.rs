//! Pointwise properties of the constitutive laws.

use flab_core::nonlinearity::{DiffusionLaw, Nonlinearity};
use proptest::prelude::*;

/// Composite Gauss–Legendre (5 points) on `n` panels.
fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Geometrically graded panels towards 0, where `s^m` is not smooth.
fn gauss_from_zero(f: impl Fn(f64) -> f64, b: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..80 {
        total += gauss(&f, 0.5 * hi, hi, 4);
        hi *= 0.5;
    }
    total
}

fn laws() -> impl Strategy<Value = Nonlinearity> {
    (1.2..4.0_f64, 1.2..4.0_f64, 0.1..0.9_f64, 1.1..3.0_f64)
        .prop_filter_map("bridge", |(m1, m2, a, b)| Nonlinearity::two_power(m1, m2, a, b, 1.0).ok())
}

proptest! {
    #[test]
    fn odd_and_increasing(nl in laws(), u in 1e-6..6.0_f64) {
        prop_assert_eq!(nl.phi(-u), -nl.phi(u));
        prop_assert_eq!(nl.phi_prime(-u), nl.phi_prime(u));
        prop_assert!(nl.phi(u) > nl.phi(0.999 * u));
        prop_assert!(nl.phi_prime(u) >= 0.0);
        prop_assert_eq!(nl.phi(0.0), 0.0);
    }

    #[test]
    fn derivative_matches_difference_quotient(nl in laws(), u in 1e-3..6.0_f64) {
        let h = 1e-6 * u;
        let fd = (nl.phi(u + h) - nl.phi(u - h)) / (2.0 * h);
        let scale = nl.phi_prime(u).abs().max(1e-8);
        prop_assert!((fd - nl.phi_prime(u)).abs() <= 1e-5 * scale, "{fd} vs {}", nl.phi_prime(u));
    }

    #[test]
    fn primitive_matches_quadrature(nl in laws(), u in 0.0..5.0_f64) {
        // split at the splice points where φ is only C¹
        let mut knots = vec![0.0];
        knots.extend(nl.knots().into_iter().filter(|&k| k < u));
        knots.push(u);
        let want: f64 = knots
            .windows(2)
            .map(|w| if w[0] == 0.0 { gauss_from_zero(|s| nl.phi(s), w[1]) } else { gauss(|s| nl.phi(s), w[0], w[1], 64) })
            .sum();
        prop_assert!((nl.psi(u) - want).abs() <= 1e-10 * (1.0 + want.abs()));
        prop_assert_eq!(nl.psi(-u), nl.psi(u));
    }
}
