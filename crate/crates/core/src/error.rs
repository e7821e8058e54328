use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented invariant or precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A constraint set admits no solution.
    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    /// An iterative method stopped before reaching its tolerance.
    ///
    /// `best` carries the best iterate seen, flattened and widened to `f64`.
    #[error("no convergence after {iterations} iterations: {message} (residual {residual:e})")]
    Convergence {
        message: String,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
