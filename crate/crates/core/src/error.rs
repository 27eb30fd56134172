use thiserror::Error;

use crate::model::LiftedPoint;

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// An optimality measure or decrease came out clearly negative, which
    /// points at a broken oracle rather than round-off.
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    /// The approximation oracle ran out of steps without meeting either exit
    /// condition. Usually means the supplied φ̄ is below φ*.
    #[error("step budget of {steps} exhausted at level {alpha} (last lifted value {value})")]
    BudgetExhausted {
        steps: usize,
        alpha: f64,
        value: f64,
        last: Box<LiftedPoint>,
    },
}

impl SolverError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SolverError::InvalidArgument(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        SolverError::UnsupportedConfiguration(msg.into())
    }
}
