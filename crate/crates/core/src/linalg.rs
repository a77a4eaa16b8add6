//! Small dense linear-algebra helpers shared by the local VEM operators.

use faer::prelude::*;
use faer::MatRef;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VemError};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    to_faer(a).singular_values().expect("svd converged")
}

/// Numerical rank: number of singular values above `tol` times the largest.
pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = singular_values(a);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Solves a square system, failing if it is numerically singular.
///
/// Rows and columns are first equilibrated to unit max-norm, which removes the
/// scaling part of the conditioning (e.g. monomials on thin faces).
pub fn solve_square(a: &DMatrix<f64>, b: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    debug_assert_eq!(a.nrows(), a.ncols());
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let inv_or_one = |m: f64| if m > 0.0 { 1.0 / m } else { 1.0 };
    let r: Vec<f64> = (0..n).map(|i| inv_or_one(a.row(i).amax())).collect();
    let mut s = DMatrix::from_fn(n, n, |i, j| r[i] * a[(i, j)]);
    let c: Vec<f64> = (0..n).map(|j| inv_or_one(s.column(j).amax())).collect();
    for j in 0..n {
        s.column_mut(j).scale_mut(c[j]);
    }
    let sv = singular_values(&s);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin < 1e-13 * smax {
        return Err(VemError::Singular {
            context: format!("{context} (cond > {:.1e})", smax / smin.max(f64::MIN_POSITIVE)),
        });
    }
    let rb = DMatrix::from_fn(n, b.ncols(), |i, j| r[i] * b[(i, j)]);
    let lu = to_faer(&s).partial_piv_lu();
    let y = lu.solve(to_faer(&rb));
    Ok(DMatrix::from_fn(n, b.ncols(), |i, j| c[i] * y[(i, j)]))
}

/// Inverse of a well-conditioned square matrix.
pub fn inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    solve_square(a, &DMatrix::identity(a.nrows(), a.nrows()), context)
}

/// Minimal-norm least-squares solution of `a x = b`, together with the rank of `a`.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    if a.nrows() == 0 || a.ncols() == 0 {
        return (DMatrix::zeros(a.ncols(), b.ncols()), 0);
    }
    let svd = to_faer(a).thin_svd().expect("svd converged");
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    let (u, v) = (from_faer(svd.U()), from_faer(svd.V()));
    let mut utb = u.transpose() * b;
    let mut r = 0;
    for i in 0..s.nrows() {
        if s[i] > tol * smax {
            utb.row_mut(i).scale_mut(1.0 / s[i]);
            r += 1;
        } else {
            utb.row_mut(i).fill(0.0);
        }
    }
    (v * utb, r)
}

/// Generalized eigenvalues of the pencil (a, b) with `b` symmetric positive definite,
/// sorted ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = b.clone().cholesky().ok_or_else(|| VemError::Singular {
        context: "generalized eigenproblem: b not SPD".into(),
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| VemError::Singular { context: "cholesky factor".into() })?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

/// Orthonormal basis of the null space of `a` (columns).
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let svd = to_faer(a).svd().expect("svd converged");
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let v = from_faer(svd.V());
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| i >= s.nrows() || s[i] <= tol * smax)
        .map(|i| v.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
