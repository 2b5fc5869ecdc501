//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A record in an input file could not be parsed.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parameter vector violates a model constraint.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// A recursion produced a non-finite or non-positive intermediate value.
    #[error("non-finite intermediate at index {index}: {message}")]
    NonFinite { index: usize, message: String },

    /// Degenerate data (e.g. zero variance) for which the statistic is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    Singular(String),

    /// An iterative method failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
