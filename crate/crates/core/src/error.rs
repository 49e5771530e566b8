use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailed {
        reason: String,
        iterations: usize,
        trace: Vec<String>,
    },

    #[error("calibration target {target:.6e} not bracketed; achieved {achieved:.6e}")]
    NotBracketed { target: f64, achieved: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
