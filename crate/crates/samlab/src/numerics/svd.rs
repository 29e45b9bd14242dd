//! Thin singular value decomposition by one-sided Jacobi orthogonalization.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Thin SVD `A = U diag(sigma) V^T` with `k = min(rows, cols)` columns on
/// each side.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// Left singular vectors, `rows x k`, orthonormal columns.
    pub u: Matrix,
    /// Singular values, descending; entries at or below the rank cutoff are
    /// exactly zero.
    pub sigma: Vec<f64>,
    /// Right singular vectors, `cols x k`, orthonormal columns.
    pub v: Matrix,
    /// Number of singular values strictly above `1e-10 * sigma_max`.
    pub rank: usize,
}

impl ThinSvd {
    /// Largest singular value (zero for an all-zero matrix).
    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }
}

/// Thin SVD of an arbitrary rectangular matrix.
///
/// Columns of the (tall side of the) matrix are orthogonalized in place by
/// plane rotations, which yields singular values at full relative accuracy —
/// exact zeros surface at round-off level rather than at the square root of
/// it, so the rank cutoff is reliable. Columns past the numerical rank are
/// completed to an orthonormal set and their singular values reported as
/// exactly zero.
pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    if a.rows() >= a.cols() {
        thin_svd_tall(a)
    } else {
        let t = thin_svd_tall(&a.transpose())?;
        Ok(ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
            rank: t.rank,
        })
    }
}

fn thin_svd_tall(a: &Matrix) -> Result<ThinSvd> {
    let (n, p) = (a.rows(), a.cols());
    debug_assert!(n >= p);

    // Work columns of A and the accumulated right-rotation matrix.
    let mut w: Vec<Vec<f64>> = (0..p).map(|j| a.col(j)).collect();
    let mut v = Matrix::identity(p);

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for i in 0..p.saturating_sub(1) {
            for j in i + 1..p {
                let (ci, cj) = pair_mut(&mut w, i, j);
                let aa: f64 = ci.iter().map(|x| x * x).sum();
                let bb: f64 = cj.iter().map(|x| x * x).sum();
                let cc: f64 = ci.iter().zip(cj.iter()).map(|(x, y)| x * y).sum();
                if aa == 0.0 || bb == 0.0 || cc.abs() <= 1e-14 * (aa * bb).sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (bb - aa) / (2.0 * cc);
                let t = if theta.abs() > 1e153 {
                    0.5 / theta
                } else if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (theta - (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                    let xi = *x;
                    let yj = *y;
                    *x = cs * xi - sn * yj;
                    *y = sn * xi + cs * yj;
                }
                for r in 0..p {
                    let vi = v.get(r, i);
                    let vj = v.get(r, j);
                    v.set(r, i, cs * vi - sn * vj);
                    v.set(r, j, sn * vi + cs * vj);
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::NoConvergence {
                context: "one-sided Jacobi SVD",
            });
        }
    }

    let norms: Vec<f64> = w
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));

    let mut sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = 1e-10 * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > cutoff).count();
    for s in sigma.iter_mut().skip(rank) {
        *s = 0.0;
    }

    let mut u = Matrix::zeros(n, p);
    for (dst, &src) in order.iter().enumerate().take(rank) {
        for r in 0..n {
            u.set(r, dst, w[src][r] / norms[src]);
        }
    }
    complete_orthonormal(&mut u, rank);

    let mut v_sorted = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..p {
            v_sorted.set(r, dst, v.get(r, src));
        }
    }

    Ok(ThinSvd {
        u,
        sigma,
        v: v_sorted,
        rank,
    })
}

/// Disjoint mutable borrows of two column vectors (`i < j`).
fn pair_mut(w: &mut [Vec<f64>], i: usize, j: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    debug_assert!(i < j);
    let (lo, hi) = w.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

/// Fill columns `start..` of `m` with unit vectors orthogonal to all earlier
/// columns, chosen from the standard basis by largest residual.
fn complete_orthonormal(m: &mut Matrix, start: usize) {
    let dim = m.rows();
    for j in start..m.cols() {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for cand in 0..dim {
            let mut v = vec![0.0; dim];
            v[cand] = 1.0;
            for _pass in 0..2 {
                for prev in 0..j {
                    let ip: f64 = (0..dim).map(|i| v[i] * m.get(i, prev)).sum();
                    for (i, slot) in v.iter_mut().enumerate() {
                        *slot -= ip * m.get(i, prev);
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("dim >= 1");
        for (i, x) in v.iter().enumerate() {
            m.set(i, j, x / norm);
        }
    }
}
