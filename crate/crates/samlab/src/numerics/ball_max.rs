//! Exact maximization of a quadratic over a Euclidean ball.

use crate::error::{Error, Result};
use crate::numerics::eigen::sym_eig;
use crate::numerics::Matrix;

/// Result of maximizing `0.5 e^T H e + g^T e` over `||e|| <= radius`.
#[derive(Debug, Clone)]
pub struct BallMax {
    /// The attained maximum value.
    pub value: f64,
    /// A maximizer (not unique in degenerate cases).
    pub argmax: Vec<f64>,
    /// KKT multiplier `lambda >= max(0, d_max)` with `(lambda I - H) e = g`.
    pub multiplier: f64,
}

/// Maximize `0.5 e^T H e + g^T e` subject to `||e|| <= radius`, exactly, via
/// the eigendecomposition of `H`.
///
/// The stationarity system `(lambda I - H) e = g` is solved in the eigenbasis.
/// When the gradient has no component on the top eigenspace the solution is
/// completed with a free component on that eigenspace (or accepted in the
/// interior when `H` is negative definite and the unconstrained optimum fits
/// inside the ball); otherwise the multiplier is found by bisection on the
/// strictly decreasing norm profile.
pub fn ball_quadratic_max(h: &Matrix, g: &[f64], radius: f64) -> Result<BallMax> {
    h.require_symmetric()?;
    let n = h.rows();
    if g.len() != n {
        return Err(Error::Dimension {
            context: "ball maximization gradient",
            expected: n,
            got: g.len(),
        });
    }
    if !g.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            context: "ball maximization gradient",
        });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            value: radius,
            requirement: "must be positive and finite",
        });
    }

    let eig = sym_eig(h)?;
    let d = &eig.eigenvalues;
    let g_hat = eig.to_eigenbasis(g)?;
    let g_norm = g_hat.iter().map(|x| x * x).sum::<f64>().sqrt();

    let d_top = d[0];
    let lambda_floor = d_top.max(0.0);
    let scale = d[0].abs().max(d[n - 1].abs()).max(1.0);
    let cluster: Vec<usize> = (0..n)
        .filter(|&i| (d[i] - lambda_floor).abs() <= 1e-10 * scale)
        .collect();
    let cluster_mass: f64 = cluster.iter().map(|&i| g_hat[i] * g_hat[i]).sum();
    let mass_cut = {
        let t = 1e-12 * g_norm.max(1e-300);
        t * t
    };

    let phi_rest: f64 = (0..n)
        .filter(|i| !cluster.contains(i))
        .map(|i| {
            let c = g_hat[i] / (lambda_floor - d[i]);
            c * c
        })
        .sum();

    let rho_sq = radius * radius;
    let coords;
    let multiplier;
    if cluster_mass <= mass_cut && phi_rest <= rho_sq {
        // Gradient is orthogonal to the binding eigenspace: either the
        // unconstrained optimum lies inside the ball (negative definite H) or
        // the solution is completed with a free top-eigenspace component.
        multiplier = lambda_floor;
        let mut c = vec![0.0; n];
        for i in 0..n {
            if !cluster.contains(&i) {
                c[i] = g_hat[i] / (lambda_floor - d[i]);
            }
        }
        if let Some(&first) = cluster.first() {
            c[first] = f64::copysign((rho_sq - phi_rest).max(0.0).sqrt(), g_hat[first]);
        }
        coords = c;
    } else {
        // Norm profile phi(lambda) = sum g_i^2 / (lambda - d_i)^2 is strictly
        // decreasing above lambda_floor; bracket the boundary multiplier and
        // bisect.
        let phi = |lam: f64| -> f64 {
            (0..n)
                .map(|i| {
                    let c = g_hat[i] / (lam - d[i]);
                    c * c
                })
                .sum()
        };
        let mut lo = lambda_floor;
        let mut hi = (d_top + g_norm / radius).max(lambda_floor);
        let mut guard = 0;
        while phi(hi) > rho_sq && guard < 200 {
            hi = lambda_floor + 2.0 * (hi - lambda_floor).max(1e-300);
            guard += 1;
        }
        let mut iters = 0;
        while hi - lo > 1e-12 * hi.abs().max(1.0) && iters < 500 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > rho_sq {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        let lam = 0.5 * (lo + hi);
        let mut c: Vec<f64> = (0..n).map(|i| g_hat[i] / (lam - d[i])).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let f = radius / norm;
            for x in &mut c {
                *x *= f;
            }
        }
        multiplier = lam;
        coords = c;
    }

    let value: f64 = (0..n)
        .map(|i| 0.5 * d[i] * coords[i] * coords[i] + g_hat[i] * coords[i])
        .sum();
    let argmax = eig.from_eigenbasis(&coords)?;
    Ok(BallMax {
        value,
        argmax,
        multiplier,
    })
}
