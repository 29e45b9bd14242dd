//! Self-contained dense real linear algebra: symmetric eigendecomposition
//! (cyclic Jacobi), thin SVD, Cholesky, and the exact maximization of a
//! quadratic over a Euclidean ball.
//!
//! Everything is deterministic: fixed sweep orders, a fixed eigenvector sign
//! convention, and bisection with a fixed tolerance, so downstream
//! trajectories are reproducible bit for bit across runs.

mod ball_max;
mod cholesky;
mod eigen;
mod matrix;
mod scalar;
mod svd;
pub mod vec;

pub use ball_max::ball_quadratic_max;
pub use cholesky::cholesky;
pub use eigen::{sym_eig, SymEig};
pub use matrix::Matrix;
pub use scalar::{contraction_pow, one_minus_contraction_pow};
pub use svd::{thin_svd, ThinSvd};
