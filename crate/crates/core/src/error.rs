use thiserror::Error;

use crate::fantope::FantopeSolution;
use crate::location::CenterEstimate;
use crate::numerics::EigenPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Best state reached by an iterative routine that ran out of iterations.
#[derive(Debug, Clone)]
pub enum LastIterate {
    Eigen(EigenPair),
    Center(CenterEstimate),
    Fantope(FantopeSolution),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("{routine} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        routine: &'static str,
        iterations: usize,
        residual: f64,
        last: Box<LastIterate>,
    },

    #[error("iterate vanished at iteration {iteration}: S·v is the zero vector")]
    DegenerateIterate { iteration: usize },

    #[error("exact enumeration refused for d = {d} (limit {limit}); use truncated_power instead")]
    TooLarge { d: usize, limit: usize },

    #[error("threshold {phi} removed every coordinate of the Fantope eigenvector")]
    EmptySupport { phi: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of an iterative numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::DegenerateIterate { .. } | Error::EmptySupport { .. }
        )
    }
}
