use thiserror::Error;

use crate::spectral::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("the zero mode carries no divergence-free direction")]
    ZeroMode,
    #[error("mode ({kx}, {ky}) lies outside truncation level {trunc}")]
    ModeOutOfRange { kx: i32, ky: i32, trunc: usize },
    #[error("mode {0} given twice (directly and through its conjugate)")]
    DuplicateMode(Mode),
    #[error("truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },
    #[error("increment vector has length {got}, expected {expected}")]
    IncrementLength { got: usize, expected: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("time {t} outside the control horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },
    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(f64, f64),
    #[error("non-finite amplitude after step at t = {0}")]
    BlowUp(f64),
    #[error("argument {0} must be nonnegative")]
    Negative(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
