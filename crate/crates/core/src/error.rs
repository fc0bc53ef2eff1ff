use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("miscoverage level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("radius bound must be positive and finite, got {0}")]
    InvalidRadiusBound(f64),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("window length {k} must lie in [1, {len}]")]
    InvalidWindow { k: usize, len: usize },
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("predict and update must alternate ({0})")]
    OutOfTurn(&'static str),
    #[error("step {step} is beyond the horizon {horizon}")]
    BeyondHorizon { step: usize, horizon: usize },
}
