//! Diffusion nonlinearities `φ` for `u_t = Δφ(u)`.
//!
//! A [`Nonlinearity`] is either a pure power `φ(u) = |u|^{m-1} u` or a
//! two-power law that equals `|u|^{m1-1} u` for `|u| ≤ a`, `|u|^{m2-1} u`
//! for `|u| ≥ b`, and a strictly increasing piecewise-cubic Hermite bridge
//! in between. Everything is extended to negative `u` as an odd function,
//! and a global `scale` multiplies the whole law.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite argument {0}")]
    NonFinite(f64),
    #[error("no strictly increasing C1 bridge exists on [{a}, {b}]")]
    BridgeNotMonotone { a: f64, b: f64 },
}

/// Evaluation interface used by the solver and the diagnostics.
///
/// Implementations must be odd in `φ`, even in `φ′` and `ψ`, and strictly
/// increasing away from zero. No argument checking happens here.
pub trait DiffusionLaw: Send + Sync {
    fn phi(&self, u: f64) -> f64;
    fn phi_prime(&self, u: f64) -> f64;
    /// Primitive `ψ(u) = ∫₀ᵘ φ(v) dv`.
    fn psi(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    PurePower,
    TwoPower,
}

/// One cubic `c0 + c1 τ + c2 τ² + c3 τ³` on `[x0, x1]`, with `τ = s - x0`.
#[derive(Debug, Clone, PartialEq)]
struct CubicPiece {
    x0: f64,
    x1: f64,
    c: [f64; 4],
    /// Unscaled `ψ` at `x0`.
    psi0: f64,
}

impl CubicPiece {
    fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> Self {
        let h = x1 - x0;
        let secant = (y1 - y0) / h;
        let c2 = (3.0 * secant - 2.0 * d0 - d1) / h;
        let c3 = (d0 + d1 - 2.0 * secant) / (h * h);
        Self {
            x0,
            x1,
            c: [y0, d0, c2, c3],
            psi0: 0.0,
        }
    }

    fn value(&self, s: f64) -> f64 {
        let t = s - self.x0;
        let [c0, c1, c2, c3] = self.c;
        c0 + t * (c1 + t * (c2 + t * c3))
    }

    fn slope(&self, s: f64) -> f64 {
        let t = s - self.x0;
        let [_, c1, c2, c3] = self.c;
        c1 + t * (2.0 * c2 + t * 3.0 * c3)
    }

    /// `∫_{x0}^{s}` of the cubic.
    fn integral_to(&self, s: f64) -> f64 {
        let t = s - self.x0;
        let [c0, c1, c2, c3] = self.c;
        t * (c0 + t * (c1 / 2.0 + t * (c2 / 3.0 + t * c3 / 4.0)))
    }

    /// Strict positivity of the derivative on the closed piece.
    fn is_increasing(&self) -> bool {
        let h = self.x1 - self.x0;
        let [_, c1, c2, c3] = self.c;
        let end = self.slope(self.x1);
        if !(c1 > 0.0 && end > 0.0) {
            return false;
        }
        if c3 != 0.0 {
            let t = -c2 / (3.0 * c3);
            if t > 0.0 && t < h {
                return c1 - c2 * c2 / (3.0 * c3) > 0.0;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: Kind,
    m1: f64,
    m2: f64,
    a: f64,
    b: f64,
    scale: f64,
    bridge: Vec<CubicPiece>,
    /// Unscaled `ψ(b)`; only meaningful when the bridge is non-empty.
    psi_b: f64,
}

fn check_exponent(name: &str, m: f64) -> Result<(), NonlinearityError> {
    if m.is_finite() && m > 1.0 {
        Ok(())
    } else {
        Err(NonlinearityError::InvalidParameter(format!(
            "{name} must exceed 1 (got {m})"
        )))
    }
}

impl Nonlinearity {
    /// `φ(u) = scale · |u|^{m-1} u`.
    pub fn pure_power(m: f64, scale: f64) -> Result<Self, NonlinearityError> {
        check_exponent("m", m)?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(NonlinearityError::InvalidParameter(format!(
                "scale must be positive (got {scale})"
            )));
        }
        Ok(Self {
            kind: Kind::PurePower,
            m1: m,
            m2: m,
            a: 0.5,
            b: 2.0,
            scale,
            bridge: Vec::new(),
            psi_b: 0.0,
        })
    }

    /// Two-power law with a C¹ monotone cubic bridge on `[a, b]`.
    ///
    /// The bridge is the cubic Hermite interpolant of the endpoint values
    /// and slopes. When that cubic is not strictly increasing, the interval
    /// is split at an interior knot whose value and slope are chosen so that
    /// both halves satisfy the Fritsch–Carlson bounds while the endpoint
    /// slopes (and hence the C¹ joins) are kept.
    pub fn two_power(m1: f64, m2: f64, a: f64, b: f64, scale: f64) -> Result<Self, NonlinearityError> {
        check_exponent("m1", m1)?;
        check_exponent("m2", m2)?;
        if !(a > 0.0 && a < 1.0 && b > 1.0 && b.is_finite()) {
            return Err(NonlinearityError::InvalidParameter(format!(
                "splice interval must satisfy 0 < a < 1 < b (got a={a}, b={b})"
            )));
        }
        Self::two_power_on(m1, m2, a, b, scale)
    }

    /// Same as [`Nonlinearity::two_power`] but accepts any `0 < a < b`,
    /// e.g. the small-amplitude splice `[1/16, 1/8]`.
    pub fn two_power_on(m1: f64, m2: f64, a: f64, b: f64, scale: f64) -> Result<Self, NonlinearityError> {
        check_exponent("m1", m1)?;
        check_exponent("m2", m2)?;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(NonlinearityError::InvalidParameter(format!(
                "splice interval must satisfy 0 < a < b (got a={a}, b={b})"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(NonlinearityError::InvalidParameter(format!(
                "scale must be positive (got {scale})"
            )));
        }
        let mut nl = Self {
            kind: Kind::TwoPower,
            m1,
            m2,
            a,
            b,
            scale,
            bridge: Vec::new(),
            psi_b: 0.0,
        };
        if m1 == m2 {
            // the power law itself is the bridge
            return Ok(nl);
        }
        let (ya, da) = (a.powf(m1), m1 * a.powf(m1 - 1.0));
        let (yb, db) = (b.powf(m2), m2 * b.powf(m2 - 1.0));
        if !(yb > ya) {
            return Err(NonlinearityError::BridgeNotMonotone { a, b });
        }
        let single = CubicPiece::hermite(a, b, ya, yb, da, db);
        let mut pieces = if single.is_increasing() {
            vec![single]
        } else {
            split_bridge(a, b, ya, yb, da, db).ok_or(NonlinearityError::BridgeNotMonotone { a, b })?
        };
        let mut acc = a.powf(m1 + 1.0) / (m1 + 1.0);
        for p in pieces.iter_mut() {
            p.psi0 = acc;
            acc += p.integral_to(p.x1);
        }
        nl.psi_b = acc;
        nl.bridge = pieces;
        Ok(nl)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Splice interval `[a, b]` (nominal for pure powers).
    pub fn splice(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Points in `(0, ∞)` where φ is only C¹: the bridge ends and any
    /// interior bridge knot. Empty when there is no bridge.
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.bridge.iter().map(|p| p.x0).collect();
        k.extend(self.bridge.last().map(|p| p.x1));
        k
    }

    fn has_bridge(&self) -> bool {
        !self.bridge.is_empty()
    }

    fn piece(&self, s: f64) -> &CubicPiece {
        self.bridge
            .iter()
            .find(|p| s <= p.x1)
            .unwrap_or_else(|| self.bridge.last().expect("bridge is non-empty"))
    }

    fn shape(&self, s: f64) -> f64 {
        if !self.has_bridge() || s <= self.a {
            s.powf(self.m1)
        } else if s >= self.b {
            s.powf(self.m2)
        } else {
            self.piece(s).value(s)
        }
    }

    fn shape_slope(&self, s: f64) -> f64 {
        if !self.has_bridge() || s <= self.a {
            self.m1 * s.powf(self.m1 - 1.0)
        } else if s >= self.b {
            self.m2 * s.powf(self.m2 - 1.0)
        } else {
            self.piece(s).slope(s)
        }
    }

    fn shape_primitive(&self, s: f64) -> f64 {
        if !self.has_bridge() || s <= self.a {
            s.powf(self.m1 + 1.0) / (self.m1 + 1.0)
        } else if s >= self.b {
            let e = self.m2 + 1.0;
            self.psi_b + (s.powf(e) - self.b.powf(e)) / e
        } else {
            let p = self.piece(s);
            p.psi0 + p.integral_to(s)
        }
    }

    pub fn try_phi(&self, u: f64) -> Result<f64, NonlinearityError> {
        finite(u).map(|u| self.phi(u))
    }

    pub fn try_phi_prime(&self, u: f64) -> Result<f64, NonlinearityError> {
        finite(u).map(|u| self.phi_prime(u))
    }

    pub fn try_psi(&self, u: f64) -> Result<f64, NonlinearityError> {
        finite(u).map(|u| self.psi(u))
    }
}

fn finite(u: f64) -> Result<f64, NonlinearityError> {
    if u.is_finite() {
        Ok(u)
    } else {
        Err(NonlinearityError::NonFinite(u))
    }
}

/// Two Hermite pieces joined at an interior knot, endpoint slopes fixed.
fn split_bridge(a: f64, b: f64, ya: f64, yb: f64, da: f64, db: f64) -> Option<Vec<CubicPiece>> {
    // Knot value window keeping both secants above a third of the
    // adjacent endpoint slope: lo ≤ yk ≤ hi.
    let window = |xk: f64| {
        let lo = ya + (xk - a) * da / 3.0;
        let hi = yb - (b - xk) * db / 3.0;
        (lo, hi)
    };
    let best = (1..20)
        .map(|i| a + (b - a) * i as f64 / 20.0)
        .map(|xk| {
            let (lo, hi) = window(xk);
            (xk, hi - lo)
        })
        .filter(|&(_, gap)| gap > 0.0)
        .max_by(|x, y| x.1.total_cmp(&y.1))?;
    let xk = best.0;
    let (lo, hi) = window(xk);
    let yk = 0.5 * (lo + hi);
    let s1 = (yk - ya) / (xk - a);
    let s2 = (yb - yk) / (b - xk);
    let dk = s1.min(s2);
    let pieces = vec![
        CubicPiece::hermite(a, xk, ya, yk, da, dk),
        CubicPiece::hermite(xk, b, yk, yb, dk, db),
    ];
    pieces.iter().all(CubicPiece::is_increasing).then_some(pieces)
}

impl DiffusionLaw for Nonlinearity {
    #[inline]
    fn phi(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        self.scale * u.signum() * self.shape(u.abs())
    }

    #[inline]
    fn phi_prime(&self, u: f64) -> f64 {
        if u == 0.0 {
            // m1 > 1
            return 0.0;
        }
        self.scale * self.shape_slope(u.abs())
    }

    #[inline]
    fn psi(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        self.scale * self.shape_primitive(u.abs())
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::PurePower => write!(f, "pure-power m={} scale={}", self.m1, self.scale),
            Kind::TwoPower => write!(
                f,
                "two-power m1={} m2={} a={} b={} scale={}",
                self.m1, self.m2, self.a, self.b, self.scale
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub c1_best: f64,
    pub c2_best: f64,
    pub ok: bool,
}

/// Samples `φ′(u)/|u|^{m-1}` on log-spaced grids over `(0, 1]` (with `m1`)
/// and `(1, u_max]` (with `m2`), on both signs, and reports the minima.
pub fn verify_growth_conditions<L: DiffusionLaw + ?Sized>(
    law: &L,
    m1: f64,
    m2: f64,
    u_max: f64,
    n: usize,
) -> GrowthReport {
    assert!(u_max > 1.0 && n >= 100, "need u_max > 1 and n >= 100");
    let lower = 1e-8_f64.ln();
    let small = (0..n).map(|i| (lower * (1.0 - i as f64 / (n - 1) as f64)).exp());
    let upper = u_max.ln();
    let large = (1..=n).map(|i| (upper * i as f64 / n as f64).exp());

    let ratio_min = |samples: &mut dyn Iterator<Item = f64>, m: f64| {
        samples
            .flat_map(|s| [s, -s])
            .map(|u| law.phi_prime(u) / u.abs().powf(m - 1.0))
            .fold(f64::INFINITY, |acc, r| if r.is_nan() { f64::NEG_INFINITY } else { acc.min(r) })
    };
    let c1_best = ratio_min(&mut small.into_iter(), m1);
    let c2_best = ratio_min(&mut large.into_iter(), m2);
    GrowthReport {
        c1_best,
        c2_best,
        ok: c1_best > 0.0 && c2_best > 0.0,
    }
}
