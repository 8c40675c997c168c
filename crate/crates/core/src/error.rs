use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unsupported element: {0}")]
    UnsupportedElement(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid comparison: {0}")]
    InvalidComparison(String),
    #[error("sample rate {sample_rate} Hz aliases tone at {tone_hz} Hz")]
    Aliasing { sample_rate: f64, tone_hz: f64 },
    #[error("ambiguous peak at {f0} Hz: tone at {other} Hz lies inside its floor annulus")]
    AmbiguousPeak { f0: f64, other: f64 },
    #[error("calibration failure: {0}")]
    CalibrationFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
