use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),

    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),

    #[error("invalid metric matrix: {0}")]
    InvalidMetric(String),

    #[error("invalid dual state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("output grid size {0} is not a perfect square >= 4")]
    NonSquareGrid(usize),

    #[error("row {row} of the discretized channel underflows to zero (grid too small or noise variance too small for the spacing)")]
    GridUnderflow { row: usize },

    #[error("power budget {budget} is infeasible: smallest symbol power is {min_power}")]
    InfeasiblePower { budget: f64, min_power: f64 },

    #[error("no sign change of {function} found below {cap}")]
    NoSignChange { function: &'static str, cap: f64 },

    #[error("numerical failure in {0}")]
    NumericalFailure(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
