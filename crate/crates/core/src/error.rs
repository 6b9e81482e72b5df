use thiserror::Error;

use crate::nnqp::WeightVector;
use crate::selectors::SelectionResult;

/// The restricted solver stopped before meeting its KKT tolerance.
///
/// Carries the best feasible iterate found so far so callers can still
/// inspect or serialize it.
#[derive(Debug, Clone, Error)]
#[error("solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
pub struct SolverFailure {
    pub best: WeightVector,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Solver(#[from] SolverFailure),

    #[error("selection stopped after {} prototypes: {source}", partial.indices.len())]
    Selection {
        source: SolverFailure,
        partial: Box<SelectionResult>,
    },

    #[error("instance too large for exhaustive enumeration: {0}")]
    Guard(String),
}

pub type Result<T> = std::result::Result<T, Error>;
