//! Thomas algorithm for tridiagonal systems.

use crate::error::{PatinaError, Result};

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored. No pivoting; callers supply
/// diagonally dominant systems.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    for len in [sub.len(), sup.len(), rhs.len()] {
        if len != n {
            return Err(PatinaError::GridMismatch {
                expected: n,
                got: len,
            });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];

    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(PatinaError::ZeroPivot { index: 0 });
    }
    c[0] = sup[0] / pivot;
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(PatinaError::ZeroPivot { index: i });
        }
        c[i] = if i + 1 < n { sup[i] / pivot } else { 0.0 };
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
