use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: &'static str },
    #[error("bin {bin} out of range for a {len}-point spectrum")]
    BinOutOfRange { bin: usize, len: usize },
    #[error("phase is undefined at zero-magnitude bin {0}")]
    ZeroMagnitude(usize),
    #[error("beat frequency {freq} outside the retained band [0, {edge})")]
    TargetOutOfBand { freq: f64, edge: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("scores need at least one positive and one negative label")]
    SingleClass,
    #[error("backward needs a scalar loss, got {0} elements")]
    NonScalarLoss(usize),
    #[error("non-finite loss at step {0}")]
    Diverged(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
