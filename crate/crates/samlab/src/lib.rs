//! A laboratory for the optimization dynamics of sharpness-aware minimization
//! (SAM) and gradient descent (GD) on three regression problems: linear least
//! squares, one-hidden-layer ReLU networks with frozen activation patterns,
//! and kernel regression with possibly indefinite kernels.
//!
//! The crate has two halves that check each other:
//!
//! * closed-form machinery — exact trajectories on quadratic losses, bias and
//!   variance curves, feasibility conditions with iteration bounds, and exact
//!   sharpness values ([`theory`], backed by [`numerics`]);
//! * a seeded simulation stack — data generation ([`models`], [`kernels`]),
//!   iterative optimizers ([`optimizer`]), and a Monte Carlo experiment
//!   harness ([`harness`]) whose estimates must land on the closed forms.
//!
//! Everything downstream of a seed is deterministic: same seed, same bytes,
//! independent of worker count.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod models;
pub mod numerics;
pub mod optimizer;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
