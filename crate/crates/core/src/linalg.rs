//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

/// Symmetric part `(M + Mᵀ)/2`.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = sym(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Largest eigenvalue of the symmetric part and a unit eigenvector.
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let e = sym(m).symmetric_eigen();
    let mut best = 0;
    for i in 1..e.eigenvalues.len() {
        if e.eigenvalues[i] > e.eigenvalues[best] {
            best = i;
        }
    }
    (e.eigenvalues[best], e.eigenvectors.column(best).into_owned())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() < m.ncols() { m * m.transpose() } else { m.transpose() * m };
    lambda_max(&g).max(0.0).sqrt()
}

/// Thin SVD `M = U diag(s) Vᵀ` with singular values in nalgebra's order.
///
/// nalgebra's bidiagonal QR occasionally returns factors that do not
/// reconstruct `M`, so the result is checked. On failure the transpose is
/// tried, then one-sided Jacobi.
pub fn svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let tol = 1e3 * f64::EPSILON * m.norm().max(f64::MIN_POSITIVE);
    let ok = |u: &DMatrix<f64>, s: &DVector<f64>, vt: &DMatrix<f64>| {
        (u * DMatrix::from_diagonal(s) * vt - m).norm() <= tol
    };
    let f = m.clone().svd(true, true);
    let (u, s, vt) = (f.u.expect("requested"), f.singular_values, f.v_t.expect("requested"));
    if ok(&u, &s, &vt) {
        return (u, s, vt);
    }
    let f = m.transpose().svd(true, true);
    let (v, s, ut) = (f.u.expect("requested"), f.singular_values, f.v_t.expect("requested"));
    let (u, vt) = (ut.transpose(), v.transpose());
    if ok(&u, &s, &vt) {
        return (u, s, vt);
    }
    jacobi_svd(m)
}

/// One-sided (Hestenes) Jacobi SVD of a square or tall matrix.
fn jacobi_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if m.nrows() < m.ncols() {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - sn * y;
                        mat[(r, j)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_fn(n, |k, _| a.column(k).norm());
    let mut u = a;
    for k in 0..n {
        if s[k] > 0.0 {
            u.column_mut(k).unscale_mut(s[k]);
        }
    }
    (u, s, v.transpose())
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return vec![Complex64::new(f64::NAN, f64::NAN); n];
    }
    if let Some(s) = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    // The unshifted-restart QR can stall on special structure; a similarity
    // by a fixed Householder reflector breaks it.
    for k in 1..=8 {
        let v = DVector::from_fn(n, |i, _| (k as f64 * (i as f64 + 1.0) * 0.7).sin() + 1.5);
        let h = DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared());
        if let Some(s) = Schur::try_new(&h * a * &h, f64::EPSILON, SCHUR_MAX_ITER) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    a.complex_eigenvalues().iter().copied().collect()
}

const SCHUR_MAX_ITER: usize = 5_000;

/// Largest real part of the spectrum; `-inf` for an empty matrix, NaN for
/// a non-finite one.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    let eig = eigenvalues(a);
    if eig.iter().any(|z| z.re.is_nan()) {
        return f64::NAN;
    }
    eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < 0.0
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn diag_of(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

/// Solves `A X + X Aᵀ + Q = 0` through the vectorized (Kronecker) system.
///
/// Cost is O(n⁶); intended for the small systems handled here.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = k.lu().solve(&rhs)?;
    Some(sym(&DMatrix::from_column_slice(n, n, x.as_slice())))
}

/// Strong connectivity of the digraph with an edge `i -> j` wherever
/// `adj[(i, j)] > threshold`. Self loops are ignored.
pub fn strongly_connected(adj: &DMatrix<f64>, threshold: f64) -> bool {
    let n = adj.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { adj[(i, j)] } else { adj[(j, i)] };
                if i != j && w > threshold && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Inverse of [`rows_of`]; `ncols` is used when `rows` is empty.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Option<DMatrix<f64>> {
    let c = rows.first().map_or(ncols, |r| r.len());
    if rows.iter().any(|r| r.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}
