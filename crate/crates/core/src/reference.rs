//! Exact self-similar (Barenblatt/ZKB) solutions of the porous medium
//! equation `u_t = Δ(|u|^{m-1}u)` on free space, mollified point masses,
//! and the space-time rescalings used by the sharpness experiment.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use statrs::function::beta::beta;
use thiserror::Error;

use crate::mesh::{BoxMesh, Field, MeshError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time must be positive (got {0})")]
    NonPositiveTime(f64),
    #[error("could not bracket the normalization constant for mass {0}")]
    Bracket(f64),
    #[error("support of radius {radius} around {center:?} leaves the box")]
    SupportOverflow { center: Vec<f64>, radius: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// `(α, β, κ)` with `β = 1/(N(m−1)+2)`, `α = Nβ`, `κ = (m−1)β/(2m)`.
pub fn zkb_exponents(m: f64, dim: usize) -> Result<(f64, f64, f64), ReferenceError> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(ReferenceError::InvalidParameter(format!("m must exceed 1 (got {m})")));
    }
    if !(1..=3).contains(&dim) {
        return Err(ReferenceError::InvalidParameter(format!("unsupported dimension {dim}")));
    }
    let n = dim as f64;
    let beta = 1.0 / (n * (m - 1.0) + 2.0);
    Ok((n * beta, beta, (m - 1.0) * beta / (2.0 * m)))
}

fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Double-exponential quadrature on `[a, b]`. Converges fast for bounded
/// integrands with algebraic endpoint behaviour such as `(R² − r²)^p`.
pub(crate) fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    let node = |t: f64| {
        let s = FRAC_PI_2 * t.sinh();
        let ch = s.cosh();
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        let x = c + d * s.tanh();
        if w == 0.0 || x <= a || x >= b {
            0.0
        } else {
            f(x) * w
        }
    };
    const T_MAX: f64 = 3.5;
    let mut h = 0.5;
    let mut sum = node(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut est = d * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += node(t) + node(-t);
            k += 2;
        }
        let next = d * h * sum;
        if (next - est).abs() <= rel_tol * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

/// `∫_{ℝᴺ} (C − κ|ξ|²)₊^{1/(m−1)} dξ` by radial quadrature.
pub fn profile_integral(m: f64, dim: usize, c: f64) -> Result<f64, ReferenceError> {
    let (_, _, kappa) = zkb_exponents(m, dim)?;
    if c <= 0.0 {
        return Ok(0.0);
    }
    let p = 1.0 / (m - 1.0);
    let radius = (c / kappa).sqrt();
    let integrand = |r: f64| r.powi(dim as i32 - 1) * (c - kappa * r * r).max(0.0).powf(p);
    Ok(unit_sphere_area(dim) * tanh_sinh(integrand, 0.0, radius, 1e-14))
}

/// Normalization constant `C` giving the profile the requested mass,
/// by bisection on the quadrature of [`profile_integral`].
pub fn zkb_normalize(m: f64, dim: usize, mass: f64) -> Result<f64, ReferenceError> {
    zkb_exponents(m, dim)?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(ReferenceError::InvalidParameter(format!("mass must be positive (got {mass})")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while profile_integral(m, dim, hi)? < mass {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(ReferenceError::Bracket(mass));
        }
    }
    while lo == 0.0 && profile_integral(m, dim, 0.5 * hi)? >= mass {
        hi *= 0.5;
        if hi < 1e-300 {
            return Err(ReferenceError::Bracket(mass));
        }
    }
    if lo == 0.0 {
        lo = 0.5 * hi;
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if profile_integral(m, dim, mid)? < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed form of [`zkb_normalize`] through the Beta function:
/// mass `= |S^{N−1}|/2 · (C/κ)^{N/2} · C^{p} · B(N/2, p+1)`, `p = 1/(m−1)`.
pub fn zkb_normalize_closed_form(m: f64, dim: usize, mass: f64) -> Result<f64, ReferenceError> {
    let (_, _, kappa) = zkb_exponents(m, dim)?;
    let n = dim as f64;
    let p = 1.0 / (m - 1.0);
    let k = 0.5 * unit_sphere_area(dim) * kappa.powf(-n / 2.0) * beta(n / 2.0, p + 1.0);
    Ok((mass / k).powf(1.0 / (p + n / 2.0)))
}

/// Barenblatt solution of the porous medium equation with exponent `m`
/// emanating from a point mass at `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZkbProfile {
    pub m: f64,
    pub dim: usize,
    pub mass: f64,
    pub center: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub c: f64,
}

impl ZkbProfile {
    pub fn new(m: f64, mass: f64, center: &[f64]) -> Result<Self, ReferenceError> {
        let dim = center.len();
        let (alpha, beta, kappa) = zkb_exponents(m, dim)?;
        let c = zkb_normalize(m, dim, mass)?;
        Ok(Self {
            m,
            dim,
            mass,
            center: center.to_vec(),
            alpha,
            beta,
            kappa,
            c,
        })
    }

    /// `t^{−α} (C − κ|x−x0|² t^{−2β})₊^{1/(m−1)}`; `t` must be positive.
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let inner = self.c - self.kappa * r2 * t.powf(-2.0 * self.beta);
        if inner <= 0.0 {
            0.0
        } else {
            t.powf(-self.alpha) * inner.powf(1.0 / (self.m - 1.0))
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64, ReferenceError> {
        if !(t > 0.0) {
            return Err(ReferenceError::NonPositiveTime(t));
        }
        Ok(self.value(x, t))
    }

    pub fn peak(&self, t: f64) -> Result<f64, ReferenceError> {
        if !(t > 0.0) {
            return Err(ReferenceError::NonPositiveTime(t));
        }
        Ok(self.c.powf(1.0 / (self.m - 1.0)) * t.powf(-self.alpha))
    }

    /// Time at which the peak value equals `peak`.
    pub fn time_of_peak(&self, peak: f64) -> f64 {
        (self.c.powf(1.0 / (self.m - 1.0)) / peak).powf(1.0 / self.alpha)
    }

    pub fn support_radius(&self, t: f64) -> Result<f64, ReferenceError> {
        if !(t > 0.0) {
            return Err(ReferenceError::NonPositiveTime(t));
        }
        Ok((self.c / self.kappa).sqrt() * t.powf(self.beta))
    }

    /// Cell-centre samples at time `t`; the field carries time `t`.
    pub fn project(&self, mesh: Arc<BoxMesh>, t: f64) -> Result<Field, ReferenceError> {
        let radius = self.support_radius(t)?;
        check_inside(&mesh, &self.center, radius)?;
        let f = crate::mesh::project_function(mesh, |x| self.value(x, t))?;
        Ok(f.with_time(t))
    }
}

fn check_inside(mesh: &BoxMesh, center: &[f64], radius: f64) -> Result<(), ReferenceError> {
    if center.len() != mesh.dim() || mesh.distance_to_boundary(center) <= radius {
        return Err(ReferenceError::SupportOverflow {
            center: center.to_vec(),
            radius,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BumpShape {
    /// `(1 − r²/w²)₊`
    #[default]
    QuadraticCap,
    /// `(1 + cos(πr/w))/2` for `r < w`
    CosineBell,
}

/// A compactly supported bump of radius `width` around `center`, rescaled
/// so that its discrete mass is exactly `mass`.
pub fn delta_like(
    mesh: Arc<BoxMesh>,
    center: &[f64],
    width: f64,
    mass: f64,
    shape: BumpShape,
) -> Result<Field, ReferenceError> {
    if !(width >= 2.0 * mesh.max_h()) {
        return Err(ReferenceError::InvalidParameter(format!(
            "width {width} must be at least twice the mesh spacing {}",
            mesh.max_h()
        )));
    }
    if !(mass.is_finite() && mass != 0.0) {
        return Err(ReferenceError::InvalidParameter(format!("mass must be nonzero (got {mass})")));
    }
    check_inside(&mesh, center, width)?;
    let bump = |x: &[f64]| {
        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        let s2 = r2 / (width * width);
        if s2 >= 1.0 {
            return 0.0;
        }
        match shape {
            BumpShape::QuadraticCap => 1.0 - s2,
            BumpShape::CosineBell => 0.5 * (1.0 + (PI * s2.sqrt()).cos()),
        }
    };
    let mut field = crate::mesh::project_function(mesh, bump)?;
    let raw = field.integral();
    let k = mass / raw;
    field.values_mut().iter_mut().for_each(|v| *v *= k);
    Ok(field)
}

/// Cellwise `max{U*(x, τ), U_ℓ(x, τ + t0)}`.
pub fn glued_datum(
    mesh: Arc<BoxMesh>,
    star: &ZkbProfile,
    ell: &ZkbProfile,
    tau: f64,
    t0: f64,
) -> Result<Field, ReferenceError> {
    if !(tau > 0.0 && t0 > 0.0) {
        return Err(ReferenceError::InvalidParameter(format!(
            "tau and t0 must be positive (got {tau}, {t0})"
        )));
    }
    check_inside(&mesh, &star.center, star.support_radius(tau)?)?;
    check_inside(&mesh, &ell.center, ell.support_radius(tau + t0)?)?;
    Ok(crate::mesh::project_function(mesh, |x| {
        star.value(x, tau).max(ell.value(x, tau + t0))
    })?)
}

/// `(x, t) ↦ f(x0 + λ(x − x0), λ²(t + τ))`.
pub fn parabolic_rescale<F>(f: F, lambda: f64, tau: f64, x0: &[f64]) -> impl Fn(&[f64], f64) -> f64
where
    F: Fn(&[f64], f64) -> f64,
{
    assert!(lambda > 0.0 && tau >= 0.0, "need lambda > 0 and tau >= 0");
    let x0 = x0.to_vec();
    move |x: &[f64], t: f64| {
        let mut y = [0.0; 3];
        for (k, (&xi, &ci)) in x.iter().zip(&x0).enumerate() {
            y[k] = ci + lambda * (xi - ci);
        }
        f(&y[..x.len()], lambda * lambda * (t + tau))
    }
}

/// `(x, t) ↦ f(x0 + α^{−1/N}(x − x0), α^{−2/N} t)`: multiplies the mass
/// of `f` by `α`.
pub fn mass_rescale<F>(f: F, alpha: f64, x0: &[f64]) -> impl Fn(&[f64], f64) -> f64
where
    F: Fn(&[f64], f64) -> f64,
{
    let lambda = alpha.powf(-1.0 / x0.len() as f64);
    parabolic_rescale(f, lambda, 0.0, x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_examples() {
        let (a, b, k) = zkb_exponents(2.0, 1).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15 && (b - 1.0 / 3.0).abs() < 1e-15);
        assert!((k - 1.0 / 12.0).abs() < 1e-15);
        let (a, b, k) = zkb_exponents(2.0, 2).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.25).abs() < 1e-15 && (k - 1.0 / 16.0).abs() < 1e-15);
        assert!(zkb_exponents(1.0, 1).is_err());
        for &(m, n) in &[(1.3, 1), (2.7, 2), (4.0, 1)] {
            let (a, b, _) = zkb_exponents(m, n).unwrap();
            assert!((a - n as f64 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn tanh_sinh_endpoint_behaviour() {
        // ∫₀¹ (1 − s²)^{1/2} ds = π/4
        let v = tanh_sinh(|s| (1.0 - s * s).sqrt(), 0.0, 1.0, 1e-14);
        assert!((v - PI / 4.0).abs() < 1e-13, "{v}");
        let v = tanh_sinh(|s| (1.0 - s * s).powf(0.25), 0.0, 1.0, 1e-14);
        let exact = 0.5 * beta(0.5, 1.25);
        assert!((v - exact).abs() < 1e-13, "{v}");
        let v = tanh_sinh(|s| s.sqrt(), 0.0, 4.0, 1e-14);
        assert!((v - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_paths_agree() {
        for &(m, n, mass) in &[(2.0, 1, 1.0), (3.0, 1, 0.5), (1.5, 1, 2.0), (2.0, 2, 1.0), (3.0, 2, 0.3)] {
            let a = zkb_normalize(m, n, mass).unwrap();
            let b = zkb_normalize_closed_form(m, n, mass).unwrap();
            assert!((a - b).abs() <= 1e-10 * b, "m={m} N={n}: {a} vs {b}");
        }
    }

    #[test]
    fn normalization_homogeneity() {
        for &(m, n) in &[(2.0, 1), (3.0, 2)] {
            let c1 = zkb_normalize(m, n, 0.7).unwrap();
            let c2 = zkb_normalize(m, n, 1.4).unwrap();
            let expo = 1.0 / (1.0 / (m - 1.0) + n as f64 / 2.0);
            assert!((c2 / c1 - 2.0_f64.powf(expo)).abs() < 1e-8);
        }
        let tiny = zkb_normalize(2.0, 1, 1e-9).unwrap();
        assert!(tiny < 1e-5);
        assert!(zkb_normalize(2.0, 1, 0.0).is_err());
    }

    #[test]
    fn peak_and_support() {
        let p = ZkbProfile::new(2.0, 1.0, &[0.3]).unwrap();
        for t in [0.01, 0.5, 3.0] {
            let peak = p.peak(t).unwrap();
            assert!((p.value(&[0.3], t) - peak).abs() < 1e-14 * peak);
            assert!((peak * t.powf(p.alpha) - p.c).abs() < 1e-14);
            let r = p.support_radius(t).unwrap();
            assert_eq!(p.value(&[0.3 + r * (1.0 + 1e-6)], t), 0.0);
            assert_eq!(p.value(&[0.3 - r * (1.0 + 1e-6)], t), 0.0);
            assert!((p.support_radius(4.0 * t).unwrap() / r - 4.0_f64.powf(1.0 / 3.0)).abs() < 1e-14);
        }
        assert!((p.time_of_peak(p.peak(0.2).unwrap()) - 0.2).abs() < 1e-14);
        assert!(p.eval(&[0.0], 0.0).is_err());
        assert!(p.support_radius(-1.0).is_err());
    }

    #[test]
    fn profile_mass_by_quadrature() {
        for (m, center) in [(2.0, vec![0.0]), (3.0, vec![0.0, 0.0])] {
            let p = ZkbProfile::new(m, 1.0, &center).unwrap();
            for t in [0.01, 0.1, 1.0] {
                let r = p.support_radius(t).unwrap();
                let mass = if p.dim == 1 {
                    tanh_sinh(|x| p.value(&[x], t), -r, r, 1e-13)
                } else {
                    2.0 * PI * tanh_sinh(|s| s * p.value(&[s, 0.0], t), 0.0, r, 1e-13)
                };
                assert!((mass - 1.0).abs() < 1e-6, "m={m} t={t}: {mass}");
            }
        }
    }

    #[test]
    fn delta_like_mass_support_and_scaling() {
        let mesh = Arc::new(BoxMesh::interval(-2.0, 2.0, 1024).unwrap());
        let f = delta_like(mesh.clone(), &[0.1], 0.02, 1.0, BumpShape::QuadraticCap).unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-14);
        for c in 0..mesh.cell_count() {
            if f.values()[c] != 0.0 {
                assert!((mesh.center(c)[0] - 0.1).abs() < 0.02);
            }
        }
        let g = delta_like(mesh.clone(), &[0.1], 0.04, 1.0, BumpShape::QuadraticCap).unwrap();
        let sup = |f: &Field| f.values().iter().fold(0.0_f64, |m, v| m.max(*v));
        // ‖·‖∞ ∝ mass / width^N
        assert!((sup(&f) / sup(&g) - 2.0).abs() < 0.05);
        let h = delta_like(mesh.clone(), &[0.1], 0.04, 3.0, BumpShape::CosineBell).unwrap();
        assert!((h.integral() - 3.0).abs() < 1e-13);

        assert!(delta_like(mesh.clone(), &[1.99], 0.02, 1.0, BumpShape::QuadraticCap).is_err());
        assert!(delta_like(mesh, &[0.0], 0.005, 1.0, BumpShape::QuadraticCap).is_err());
    }

    #[test]
    fn glued_datum_properties() {
        let mesh = Arc::new(BoxMesh::interval(-2.0, 2.0, 2048).unwrap());
        let star = ZkbProfile::new(2.0, 1.0, &[0.0]).unwrap();
        let ell = ZkbProfile::new(3.0, 0.5, &[0.0]).unwrap();
        let t0 = ell.time_of_peak(0.25);
        let tau = 1e-3;
        let u = glued_datum(mesh.clone(), &star, &ell, tau, t0).unwrap();
        assert!(u.integral() <= 1.5 + 1e-3);
        assert!(u.integral() > 1.0);
        let peak = star.peak(tau).unwrap().max(ell.peak(tau + t0).unwrap());
        let top = u.values().iter().fold(0.0_f64, |m, v| m.max(*v));
        assert!((top - peak).abs() < 1e-3 * peak);

        let faint = ZkbProfile::new(3.0, 1e-12, &[0.0]).unwrap();
        let v = glued_datum(mesh.clone(), &star, &faint, tau, 1.0).unwrap();
        let w = star.project(mesh.clone(), tau).unwrap();
        for (a, b) in v.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!(glued_datum(mesh, &star, &ell, tau, 1e4).is_err());
    }

    #[test]
    fn rescalings() {
        let p = ZkbProfile::new(2.0, 1.0, &[0.0]).unwrap();
        let f = |x: &[f64], t: f64| p.value(x, t);
        let id = parabolic_rescale(f, 1.0, 0.0, &[0.0]);
        for x in [-0.3, 0.0, 0.2] {
            assert_eq!(id(&[x], 0.1), p.value(&[x], 0.1));
        }
        // support of the rescaled function at t has radius R(λ²t)/λ
        let lambda = 1.7;
        let g = parabolic_rescale(f, lambda, 0.0, &[0.0]);
        let r = p.support_radius(lambda * lambda * 0.1).unwrap() / lambda;
        assert!(g(&[0.999 * r], 0.1) > 0.0);
        assert_eq!(g(&[1.001 * r], 0.1), 0.0);

        let mesh = Arc::new(BoxMesh::interval(-4.0, 4.0, 4096).unwrap());
        let half = mass_rescale(f, 0.5, &[0.0]);
        let u = crate::mesh::project_function(mesh, |x| half(x, 0.05)).unwrap();
        assert!((u.integral() - 0.5).abs() < 1e-4, "{}", u.integral());
    }
}
