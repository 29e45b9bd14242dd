//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong below the CLI layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix must be symmetric; max |a_ij - a_ji| = {max_deviation:e} exceeds tolerance")]
    NotSymmetric { max_deviation: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("empty input: {context}")]
    EmptyInput { context: &'static str },

    #[error("invalid parameter {name} = {value}: must satisfy {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("matrix is not positive definite (pivot value {pivot:e} is not positive)")]
    NotPositiveDefinite { pivot: f64 },

    #[error("iteration limit reached without convergence in {context}")]
    NoConvergence { context: &'static str },

    #[error("gradient evaluated to a non-finite value")]
    NonFiniteGradient,

    #[error("trajectory diverged at iteration {iteration} (norm guard exceeded)")]
    Diverged { iteration: usize },

    #[error("eigenvalue {index} is zero (value {value:e}); full rank required")]
    ZeroEigenvalue { index: usize, value: f64 },

    #[error("spectrum must contain at least one {need} eigenvalue")]
    MissingEigenvalueSign { need: &'static str },

    #[error("precondition violated: {inequality} fails")]
    Precondition { inequality: &'static str },

    #[error("pair count {requested} exceeds the {max} distinct index pairs available")]
    PairCountTooLarge { requested: usize, max: usize },

    #[error("configuration error: {0}")]
    Config(String),
}
