//! Poincaré constants of boxes: exact, and from the discrete Neumann
//! Laplacian.

use std::f64::consts::PI;

use crate::mesh::BoxMesh;

use super::AnalysisError;

/// `1/√λ1` with `λ1 = (π / longest side)²`.
pub fn poincare_constant_box(extents: &[f64]) -> f64 {
    let longest = extents.iter().copied().fold(0.0, f64::max);
    longest / PI
}

const OUTER_TOL: f64 = 1e-10;
const MAX_OUTER: usize = 10_000;

/// `1/√λ1ʰ`, the smallest nonzero eigenvalue of the cell-centred Neumann
/// Laplacian found by inverse iteration on the mean-zero subspace.
pub fn poincare_constant_numeric(mesh: &BoxMesh) -> Result<f64, AnalysisError> {
    Ok(1.0 / smallest_nonzero_eigenvalue(mesh)?.sqrt())
}

pub fn smallest_nonzero_eigenvalue(mesh: &BoxMesh) -> Result<f64, AnalysisError> {
    let lap = NeumannLaplacian::new(mesh);
    let n = lap.len();
    // start from a smooth mean-zero vector with a component along the
    // slowest mode of the longest axis
    let longest = (0..mesh.dim())
        .max_by(|&a, &b| mesh.axis(a).length.total_cmp(&mesh.axis(b).length))
        .unwrap_or(0);
    let mut x: Vec<f64> = (0..n)
        .map(|c| {
            let p = mesh.center(c);
            let ax = mesh.axis(longest);
            let s = (p[longest] - ax.origin) / ax.length;
            (PI * s).cos() + 0.1 * (3.0 * PI * s).cos() + 0.01 * (c as f64 * 0.37).sin()
        })
        .collect();
    deflate(&mut x);
    normalize(&mut x);
    let mut lambda = rayleigh(&lap, &x);
    for _ in 0..MAX_OUTER {
        let mut y = lap.solve_mean_zero(&x);
        deflate(&mut y);
        normalize(&mut y);
        let next = rayleigh(&lap, &y);
        x = y;
        if (next - lambda).abs() <= OUTER_TOL * next {
            return Ok(next);
        }
        lambda = next;
    }
    Err(AnalysisError::NoConvergence(MAX_OUTER))
}

fn deflate(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rayleigh(lap: &NeumannLaplacian, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    lap.apply(x, &mut ax);
    dot(x, &ax) / dot(x, x)
}

/// `−Δ_h` with zero-flux boundaries; symmetric positive semidefinite with
/// the constants as kernel.
struct NeumannLaplacian {
    dims: [usize; 2],
    inv_h2: [f64; 2],
    dim: usize,
}

impl NeumannLaplacian {
    fn new(mesh: &BoxMesh) -> Self {
        let mut dims = [1, 1];
        let mut inv_h2 = [0.0, 0.0];
        for (k, a) in mesh.axes().iter().enumerate() {
            dims[k] = a.cells;
            inv_h2[k] = 1.0 / (a.h * a.h);
        }
        Self {
            dims,
            inv_h2,
            dim: mesh.dim(),
        }
    }

    fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let [nx, ny] = self.dims;
        for j in 0..ny {
            for i in 0..nx {
                let c = i + nx * j;
                let mut acc = 0.0;
                if i > 0 {
                    acc += (x[c] - x[c - 1]) * self.inv_h2[0];
                }
                if i + 1 < nx {
                    acc += (x[c] - x[c + 1]) * self.inv_h2[0];
                }
                if self.dim == 2 {
                    if j > 0 {
                        acc += (x[c] - x[c - nx]) * self.inv_h2[1];
                    }
                    if j + 1 < ny {
                        acc += (x[c] - x[c + nx]) * self.inv_h2[1];
                    }
                }
                out[c] = acc;
            }
        }
    }

    /// Conjugate gradients for `A y = b` with mean-zero `b`; the iterates
    /// stay in the range of `A`.
    fn solve_mean_zero(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let bnorm = dot(b, b).sqrt();
        let mut rr = dot(&r, &r);
        for _ in 0..(20 * n).max(100) {
            if rr.sqrt() <= 1e-14 * bnorm {
                break;
            }
            self.apply(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for k in 0..n {
                y[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let next = dot(&r, &r);
            let beta = next / rr;
            rr = next;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
        y
    }
}
