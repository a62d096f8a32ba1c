use alloc::string::String;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the numeric kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands have incompatible shapes. Both shapes are reported as
    /// `(rows, cols)`.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A buffer length does not match the shape it is supposed to carry.
    DataLength { expected: usize, got: usize },
    /// An operation received an empty input it cannot handle.
    EmptyInput(&'static str),
    /// A scalar argument violated its precondition.
    InvalidArgument { what: &'static str, details: String },
    /// A computation produced a non-finite value where a finite one is required.
    NonFinite { context: &'static str, value: f64 },
    /// Cluster initialization could not produce K pairwise-distinct weights.
    InitFailure(String),
    /// Fewer samples than the operation needs (e.g. K centers from N < K points).
    InsufficientSamples { needed: usize, got: usize },
    /// Training encountered a non-finite loss; the epoch (1-based) is reported.
    NonFiniteLoss { epoch: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: shape mismatch between {}x{} and {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::DataLength { expected, got } => {
                write!(f, "data length {got} does not match shape ({expected} expected)")
            }
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::InvalidArgument { what, details } => write!(f, "invalid {what}: {details}"),
            Error::NonFinite { context, value } => {
                write!(f, "non-finite value {value} in {context}")
            }
            Error::InitFailure(msg) => write!(f, "cluster initialization failed: {msg}"),
            Error::InsufficientSamples { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            Error::NonFiniteLoss { epoch } => {
                write!(f, "loss became non-finite during epoch {epoch}")
            }
        }
    }
}

impl core::error::Error for Error {}
