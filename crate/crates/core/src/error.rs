use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("insufficient points: need {needed} distinct atoms, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite coordinate at position {0}")]
    NonFinite(usize),

    #[error("step size {gamma} at step {step} is outside (0, 1]")]
    InvalidSchedule { step: usize, gamma: f64 },

    #[error("cluster {index} has zero count")]
    EmptyCluster { index: usize },

    #[error("transport solver failure: {0}")]
    SolverFailure(String),

    #[error("time {t} is outside (0, {horizon}]")]
    InvalidTime { t: f64, horizon: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
