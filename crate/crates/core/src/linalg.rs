//! Small dense symmetric positive-definite solves.

use crate::error::{Error, Result};

/// Solves `A x = b` in place for symmetric positive-definite `A` (row-major,
/// `n x n`). `a` is overwritten with its Cholesky factor in the lower
/// triangle, `b` with the solution.
pub fn cholesky_solve(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);

    for j in 0..n {
        let row_j = &a[j * n..j * n + j];
        let diag = a[j * n + j] - row_j.iter().map(|v| v * v).sum::<f64>();
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(Error::SingularCovariance);
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in (j + 1)..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..=j];
            let dot: f64 = row_i[..j].iter().zip(row_j).map(|(x, y)| x * y).sum();
            row_i[j] = (row_i[j] - dot) / diag;
        }
    }

    // Forward substitution: L y = b.
    for i in 0..n {
        let row = &a[i * n..i * n + i];
        let dot: f64 = row.iter().zip(&b[..i]).map(|(x, y)| x * y).sum();
        b[i] = (b[i] - dot) / a[i * n + i];
    }
    // Back substitution: Lᵀ x = y.
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in (i + 1)..n {
            acc -= a[k * n + i] * b[k];
        }
        b[i] = acc / a[i * n + i];
    }
    Ok(())
}
