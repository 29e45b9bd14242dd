//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Eigendecomposition `M = U diag(d) U^T` with descending eigenvalues and
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues, sorted descending; ties keep their pre-sort index order.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, aligned with `eigenvalues`. Sign convention:
    /// the first coordinate of each column that is nonzero (above
    /// `1e-12 * max|entry|`) is positive.
    pub eigenvectors: Matrix,
}

impl SymEig {
    /// Order of the decomposed matrix.
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coordinates of `v` in the eigenbasis: `U^T v`.
    pub fn to_eigenbasis(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.order();
        if v.len() != n {
            return Err(Error::Dimension {
                context: "eigenbasis projection",
                expected: n,
                got: v.len(),
            });
        }
        Ok((0..n)
            .map(|j| (0..n).map(|i| self.eigenvectors.get(i, j) * v[i]).sum())
            .collect())
    }

    /// Vector with eigenbasis coordinates `c`: `U c`.
    pub fn from_eigenbasis(&self, c: &[f64]) -> Result<Vec<f64>> {
        let n = self.order();
        if c.len() != n {
            return Err(Error::Dimension {
                context: "eigenbasis synthesis",
                expected: n,
                got: c.len(),
            });
        }
        Ok(self.eigenvectors.matvec(c).expect("square by construction"))
    }
}

/// Eigendecomposition of a symmetric matrix (symmetric within `1e-12`
/// relative; the symmetric average is decomposed).
pub fn sym_eig(m: &Matrix) -> Result<SymEig> {
    m.require_symmetric()?;
    let n = m.rows();
    let mut a: Vec<f64> = m.symmetrized().data().to_vec();
    let mut v = Matrix::identity(n);

    let norm0 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = 1e-14 * norm0;

    let mut converged = off_diagonal_norm(&a, n) <= threshold;
    let mut sweeps = 0;
    while !converged {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::NoConvergence {
                context: "Jacobi eigendecomposition",
            });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
        converged = off_diagonal_norm(&a, n) <= threshold;
    }

    let raw: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[j].partial_cmp(&raw[i]).expect("finite eigenvalues"));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors.set(i, dst, v.get(i, src));
        }
    }
    fix_signs(&mut eigenvectors);

    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let x = a[i * n + j];
            s += 2.0 * x * x;
        }
    }
    s.sqrt()
}

fn rotate(a: &mut [f64], v: &mut Matrix, n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e153 {
        0.5 / theta
    } else if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        1.0 / (theta - (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = a[i * n + p];
        let aiq = a[i * n + q];
        let new_p = aip - s * (aiq + tau * aip);
        let new_q = aiq + s * (aip - tau * aiq);
        a[i * n + p] = new_p;
        a[p * n + i] = new_p;
        a[i * n + q] = new_q;
        a[q * n + i] = new_q;
    }
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip - s * (viq + tau * vip));
        v.set(i, q, viq + s * (vip - tau * viq));
    }
}

fn fix_signs(u: &mut Matrix) {
    let n = u.rows();
    for j in 0..u.cols() {
        let col_max = (0..n).fold(0.0f64, |m, i| m.max(u.get(i, j).abs()));
        if col_max == 0.0 {
            continue;
        }
        let lead = (0..n).find(|&i| u.get(i, j).abs() > 1e-12 * col_max);
        if let Some(i) = lead {
            if u.get(i, j) < 0.0 {
                for r in 0..n {
                    let x = u.get(r, j);
                    u.set(r, j, -x);
                }
            }
        }
    }
}
