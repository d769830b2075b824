use std::io;

use thiserror::Error;

/// Errors produced by estimation, generation and matrix I/O.
#[derive(Debug, Error)]
pub enum CovError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    /// The closed-form variance update collapsed to zero, which leaves the
    /// iterate on the boundary of the positive definite cone.
    #[error("degenerate subproblem{}: residual a = {a:e} with rho = {rho} gives gamma <= 0",
        column.map(|c| format!(" at column {c}")).unwrap_or_default())]
    DegenerateSubproblem { column: Option<usize>, a: f64, rho: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CovError {
    /// True for failures that originate in the numerics rather than in the
    /// caller's arguments or the file system.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CovError::NotPositiveDefinite { .. } | CovError::DegenerateSubproblem { .. } | CovError::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CovError>;
