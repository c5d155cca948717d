//! Closed-form exponents of the smoothing and asymptotic estimates, and
//! the diagnostics that compare a measured series against them.

use crate::nonlinearity::DiffusionLaw;

use super::{AnalysisError, TimeSeries};

/// Interpolation exponent `θ(s, r, N) = 2N(r − s) / (r[2N − s(N − 2)])`
/// of the Gagliardo–Nirenberg–Sobolev family.
///
/// Admissible pairs: `0 < s ≤ r < ∞` for `N ≤ 2`; for `N ≥ 3` either
/// `0 < s ≤ r ≤ 2*` or `2* ≤ r ≤ s < ∞` with `2* = 2N/(N − 2)`.
pub fn theta(s: f64, r: f64, dim: usize) -> Result<f64, AnalysisError> {
    let n = dim as f64;
    let bad = || AnalysisError::ThetaDomain { s, r, dim };
    if dim == 0 || !(s > 0.0 && r > 0.0 && s.is_finite() && r.is_finite()) {
        return Err(bad());
    }
    let ok = if dim <= 2 {
        s <= r
    } else {
        let crit = 2.0 * n / (n - 2.0);
        (s <= r && r <= crit) || (crit <= r && r <= s)
    };
    if !ok {
        return Err(bad());
    }
    if s == r {
        return Ok(0.0);
    }
    Ok(2.0 * n * (r - s) / (r * (2.0 * n - s * (n - 2.0))))
}

/// Moser exponent `p_k` generated by `p_{k+1} = (N+2)/N · p_k + m1 − 1`
/// from `p_0 = q0`, in closed form:
/// `p_k = (q0 + N(m1−1)/2) · ((N+2)/N)^k − N(m1−1)/2`.
pub fn moser_p(k: u32, q0: f64, dim: usize, m1: f64) -> f64 {
    let n = dim as f64;
    let shift = n * (m1 - 1.0) / 2.0;
    (q0 + shift) * ((n + 2.0) / n).powi(k as i32) - shift
}

/// The same sequence by direct iteration of the recurrence.
pub fn moser_p_recurrence(k: u32, q0: f64, dim: usize, m1: f64) -> f64 {
    let n = dim as f64;
    (0..k).fold(q0, |p, _| (n + 2.0) / n * p + m1 - 1.0)
}

/// Predicted exponents and rates for a datum with the given `L^{q0}` norm
/// and mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    pub q0: f64,
    pub dim: usize,
    pub m1: f64,
    pub m2: f64,
    /// `N / (2q0 + N(m2 − 1))`, governs `t → 0`.
    pub short_exp: f64,
    /// `N / (2q0 + N(m1 − 1))`.
    pub long_exp: f64,
    /// `‖u0‖_{q0}^{2q0/N}`, where the two branches meet.
    pub crossover_t: f64,
    pub zero_mean_long_exp: f64,
    pub zero_mean_short_exp: f64,
    /// `φ′(ū0) / C_P²`; absent for zero-mean data.
    pub nonzero_mean_rate: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn predict_rates<L: DiffusionLaw + ?Sized>(
    q0: f64,
    dim: usize,
    m1: f64,
    m2: f64,
    u0_norm_q0: f64,
    mean0: f64,
    law: &L,
    c_p: f64,
) -> RatePrediction {
    let n = dim as f64;
    RatePrediction {
        q0,
        dim,
        m1,
        m2,
        short_exp: n / (2.0 * q0 + n * (m2 - 1.0)),
        long_exp: n / (2.0 * q0 + n * (m1 - 1.0)),
        crossover_t: u0_norm_q0.powf(2.0 * q0 / n),
        zero_mean_long_exp: 1.0 / (m1 - 1.0),
        zero_mean_short_exp: 1.0 / (m2 - 1.0),
        nonzero_mean_rate: (mean0 != 0.0).then(|| law.phi_prime(mean0) / (c_p * c_p)),
    }
}

impl RatePrediction {
    /// Bracketed smoothing envelope with unit constant: the `m2` branch
    /// before the crossover time, the `m1` branch after.
    pub fn envelope(&self, t: f64, u0_norm: f64) -> f64 {
        let n = self.dim as f64;
        let q = 2.0 * self.q0;
        let (m, exp) = if t < self.crossover_t {
            (self.m2, self.short_exp)
        } else {
            (self.m1, self.long_exp)
        };
        t.powf(-exp) * u0_norm.powf(q / (q + n * (m - 1.0))) + u0_norm
    }
}

/// `‖u(t)‖∞` over the unit-constant envelope, per positive-time record.
/// The maximum is the realized constant.
pub fn envelope_ratio(series: &TimeSeries, pred: &RatePrediction, u0_norm: f64) -> Vec<(f64, f64)> {
    series
        .records()
        .iter()
        .filter(|r| r.t > 0.0)
        .map(|r| (r.t, r.linf / pred.envelope(r.t, u0_norm)))
        .collect()
}

/// Last time at which `‖u‖∞` exceeds one, interpolated against the next
/// record linearly in `log t`. `None` when the initial record is already
/// at most one.
pub fn detect_t_star(series: &TimeSeries) -> Option<f64> {
    let recs = series.records();
    if recs.first()?.linf <= 1.0 {
        return None;
    }
    let k = recs.iter().rposition(|r| r.linf > 1.0)?;
    let Some(next) = recs.get(k + 1) else {
        return Some(recs[k].t);
    };
    let cur = &recs[k];
    let frac = (cur.linf - 1.0) / (cur.linf - next.linf);
    if cur.t > 0.0 {
        let (a, b) = (cur.t.ln(), next.t.ln());
        Some((a + frac * (b - a)).exp())
    } else {
        Some(cur.t + frac * (next.t - cur.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Provenance, Record};
    use crate::nonlinearity::Nonlinearity;
    use std::f64::consts::PI;

    fn rec(t: f64, linf: f64) -> Record {
        Record {
            t,
            mass: 0.0,
            mean: 0.0,
            min: -linf,
            max: linf,
            l1: linf,
            l2: linf,
            l4: linf,
            linf,
            energy_psi: 0.0,
        }
    }

    fn series(pts: &[(f64, f64)]) -> TimeSeries {
        TimeSeries::from_records(pts.iter().map(|&(t, v)| rec(t, v)).collect(), Provenance::default()).unwrap()
    }

    #[test]
    fn theta_examples() {
        assert!((theta(2.0, 6.0, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(theta(1.5, 1.5, 2).unwrap(), 0.0);
        assert!((theta(1.0, 2.0, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn theta_domain() {
        assert!(theta(3.0, 2.0, 1).is_err());
        assert!(theta(0.0, 2.0, 2).is_err());
        assert!(theta(2.0, 7.0, 3).is_err());
        // beyond the critical exponent the order flips
        let v = theta(8.0, 7.0, 3).unwrap();
        assert!(v > 0.0 && v <= 1.0);
        for (s, r) in [(0.5, 1.0), (1.0, 5.0), (2.0, 50.0)] {
            let v = theta(s, r, 2).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn moser_examples() {
        assert!((moser_p(0, 1.7, 1, 2.5) - 1.7).abs() < 1e-15);
        assert!((moser_p(1, 1.0, 2, 2.0) - 3.0).abs() < 1e-14);
        assert!((moser_p(2, 1.0, 2, 2.0) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn moser_closed_form_matches_recurrence() {
        for dim in 1..=3 {
            for &(q0, m1) in &[(1.0, 2.0), (2.5, 3.0), (1.0, 1.2)] {
                for k in 0..=30 {
                    let a = moser_p(k, q0, dim, m1);
                    let b = moser_p_recurrence(k, q0, dim, m1);
                    assert!((a - b).abs() <= 1e-12 * b.abs(), "N={dim} k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn prediction_examples() {
        let pm = Nonlinearity::pure_power(2.0, 1.0).unwrap();
        let p = predict_rates(1.0, 1, 3.0, 2.0, 1.0, 0.0, &pm, 1.0);
        assert!((p.short_exp - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.long_exp - 0.25).abs() < 1e-15);
        assert!((p.zero_mean_long_exp - 0.5).abs() < 1e-15);
        assert!(p.nonzero_mean_rate.is_none());

        let p = predict_rates(1.0, 1, 2.0, 2.0, 1.0, 1.0, &pm, 1.0 / PI);
        assert!((p.nonzero_mean_rate.unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        assert_eq!(p.short_exp, p.long_exp);
    }

    #[test]
    fn zero_mean_exponent_identity() {
        for n in 1..=3 {
            for &(q0, m1) in &[(1.0, 2.0), (2.0, 3.0), (1.5, 1.3)] {
                let nn = n as f64;
                let lhs = nn / (2.0 * q0 + nn * (m1 - 1.0))
                    + 2.0 * q0 / ((m1 - 1.0) * (2.0 * q0 + nn * (m1 - 1.0)));
                assert!((lhs - 1.0 / (m1 - 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn envelope_ratio_of_envelope_is_one() {
        let pm = Nonlinearity::pure_power(2.0, 1.0).unwrap();
        let pred = predict_rates(1.0, 1, 3.0, 2.0, 2.0, 0.0, &pm, 1.0);
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|i| 1e-4 * 1.5_f64.powi(i))
            .map(|t| (t, pred.envelope(t, 2.0)))
            .collect();
        for (_, r) in envelope_ratio(&series(&pts), &pred, 2.0) {
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn t_star_examples() {
        assert_eq!(detect_t_star(&series(&[(0.0, 1.0), (1.0, 0.5)])), None);
        let s = series(&[(1.0, 2.0), (2.0, 1.0), (4.0, 0.5)]);
        assert!((detect_t_star(&s).unwrap() - 2.0).abs() < 1e-14);
        let s = series(&[(0.0, 3.0), (1.0, 2.0), (2.0, 1.5)]);
        assert_eq!(detect_t_star(&s), Some(2.0));
        let s = series(&[(0.0, 3.0), (1.0, 0.0)]);
        assert!((detect_t_star(&s).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
