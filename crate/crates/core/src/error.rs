use thiserror::Error;

use crate::even_p::SolverState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("singular expression: {0}")]
    Singularity(String),

    #[error("no conjugate theta exists for theta={theta}, x={x} (requires x*theta > 1)")]
    NoConjugate { theta: f64, x: f64 },

    #[error("solver did not converge after {iters} iterations (residual {residual:e})")]
    NotConverged {
        iters: usize,
        residual: f64,
        best: Box<SolverState>,
    },

    #[error("instance too large for exhaustive enumeration: n={n} exceeds {max}")]
    TooLarge { n: usize, max: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateVariance(msg.into())
    }

    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::Singularity(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance(_) | Error::Singularity(_) | Error::NotConverged { .. }
        )
    }
}
