//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A vector or codebook dimension did not match the system dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An encoder was handed an empty codebook.
    #[error("codebook is empty")]
    EmptyCodebook,

    /// A direction was constructed from the all-zero integer vector.
    #[error("direction must be a nonzero integer vector")]
    ZeroVector,

    /// A direction key failed the primitivity invariant (gcd of its
    /// coordinates is greater than one).
    #[error("integer vector {0:?} is not primitive")]
    NotPrimitive(Vec<i64>),

    /// A bound evaluation needed more codebook layers than were supplied.
    #[error("layer sizes required through layer {needed}, available through {available}")]
    InsufficientLayers { needed: usize, available: usize },

    /// An internal invariant that the construction guarantees was violated.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// Malformed textual input (CSV import, config files).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
