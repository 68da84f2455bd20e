use thiserror::Error;

/// Errors raised by the numerical kernels, samplers and the allocator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("probability {value} outside [0, 1] beyond rounding slack ({context})")]
    OutOfRange { value: f64, context: String },

    #[error("insufficient trials: {trials} trials at target {target_pf} leaves fewer than 20 exceedances")]
    InsufficientTrials { trials: usize, target_pf: f64 },

    #[error("threshold search window [{lo}, {hi}] too small: minimum sits on the upper boundary")]
    Window { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
