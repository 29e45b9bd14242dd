//! Cholesky factorization of symmetric positive-definite matrices.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Lower-triangular `L` with `M = L L^T`.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot is not strictly
/// positive, and with the symmetry errors of
/// [`Matrix::require_symmetric`] on malformed input.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    m.require_symmetric()?;
    let n = m.rows();
    let a = m.symmetrized();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            let x = l.get(j, k);
            diag -= x * x;
        }
        if diag <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: diag });
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}
