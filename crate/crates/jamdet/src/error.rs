//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum JamdetError {
    /// Caller passed an argument outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The detector needs more sensing nodes than the matrix provides.
    #[error("insufficient dimension: {0}")]
    InsufficientDimension(String),
    /// Input is degenerate (linearly dependent vectors, rank-deficient denominator, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// A covariance matrix failed the positive-definiteness check.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    /// Perturbed covariance eigenvalues are still not strictly decreasing.
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// The analytic machinery only covers certain dimensions.
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    /// Monte-Carlo budget too small for the requested quantile.
    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, JamdetError>;
