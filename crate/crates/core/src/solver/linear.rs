//! Linear solves for the Newton correction `(I − dt·L·D) δ = r`.

use super::Stencil;

/// Thomas elimination for the 1D system. The matrix has unit column
/// sums plus a positive diagonal excess, i.e. it is column diagonally
/// dominant, so no pivoting is needed.
pub(crate) fn solve_tridiagonal(stencil: &Stencil, dt: f64, d: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let k = dt * stencil.inv_h2[0];
    let lower = |i: usize| -k * d[i - 1];
    let upper = |i: usize| -k * d[i + 1];
    let diag = |i: usize| {
        let nb = (i > 0) as usize + (i + 1 < n) as usize;
        1.0 + k * nb as f64 * d[i]
    };

    let mut c = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut piv = diag(0);
    c[0] = if n > 1 { upper(0) / piv } else { 0.0 };
    y[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag(i) - lower(i) * c[i - 1];
        if i + 1 < n {
            c[i] = upper(i) / piv;
        }
        y[i] = (rhs[i] - lower(i) * y[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        y[i] -= c[i] * y[i + 1];
    }
    y
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KrylovOutcome {
    pub iterations: usize,
    pub converged: bool,
}

/// Jacobi-preconditioned BiCGSTAB on the matrix-free Jacobian.
pub(crate) fn solve_bicgstab(
    stencil: &Stencil,
    dt: f64,
    d: &[f64],
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, KrylovOutcome) {
    let n = rhs.len();
    let apply = |x: &[f64], out: &mut [f64]| stencil.apply_jacobian(dt, d, x, out);
    let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / stencil.jacobian_diag(dt, d, i)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let norm = |a: &[f64]| dot(a, a).sqrt();

    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, KrylovOutcome { iterations: 0, converged: true });
    }
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=max_iter {
        let rho_next = dot(&r_hat, &r);
        if rho_next == 0.0 || omega == 0.0 {
            return (x, KrylovOutcome { iterations: it, converged: false });
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return (x, KrylovOutcome { iterations: it, converged: true });
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        apply(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            return (x, KrylovOutcome { iterations: it, converged: true });
        }
    }
    (x, KrylovOutcome { iterations: max_iter, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxMesh;

    fn dense_jacobian(stencil: &Stencil, dt: f64, d: &[f64]) -> Vec<Vec<f64>> {
        let n = d.len();
        (0..n)
            .map(|col| {
                let mut e = vec![0.0; n];
                e[col] = 1.0;
                let mut out = vec![0.0; n];
                stencil.apply_jacobian(dt, d, &e, &mut out);
                out
            })
            .collect()
    }

    fn residual(stencil: &Stencil, dt: f64, d: &[f64], x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        stencil.apply_jacobian(dt, d, x, &mut ax);
        ax.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn tridiagonal_matches_operator() {
        let mesh = BoxMesh::interval(0.0, 1.0, 7).unwrap();
        let st = Stencil::new(&mesh);
        let d = [0.0, 0.3, 2.0, 0.0, 5.0, 1.0, 0.1];
        let b = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0];
        let x = solve_tridiagonal(&st, 0.05, &d, &b);
        assert!(residual(&st, 0.05, &d, &x, &b) < 1e-12);
        // columns of the Jacobian sum to one
        for col in dense_jacobian(&st, 0.05, &d) {
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_solves_2d_system() {
        let mesh = BoxMesh::new(2, &[1.0, 1.0], &[0.0, 0.0], &[9, 7]).unwrap();
        let st = Stencil::new(&mesh);
        let n = mesh.cell_count();
        let d: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 * 0.4).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x, out) = solve_bicgstab(&st, 0.01, &d, &b, 1e-13, 500);
        assert!(out.converged);
        assert!(residual(&st, 0.01, &d, &x, &b) < 1e-11);
    }
}
