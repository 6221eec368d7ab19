use alloc::string::String;

use crate::fluidics::ProtocolViolation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("{gate} takes {expected} input(s), got {got}")]
    Arity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("enzyme dose overflow: E*k/t = {ratio} exceeds 1")]
    DoseOverflow { ratio: f64 },
    #[error("pools have different reference totals ({expected} vs {found})")]
    ReferenceMismatch { expected: u64, found: u64 },
    #[error("cannot combine ideal and sampled solutions")]
    ModeMismatch,
    #[error("protocol error: {0}")]
    Protocol(ProtocolViolation),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("layer {layer}: {reason}")]
    Quantization { layer: usize, reason: String },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Short machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out-of-range",
            Error::Arity { .. } => "arity",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::DoseOverflow { .. } => "dose-overflow",
            Error::ReferenceMismatch { .. } => "reference-mismatch",
            Error::ModeMismatch => "mode-mismatch",
            Error::Protocol(_) => "protocol",
            Error::Argument(_) => "argument",
            Error::Constraint(_) => "constraint",
            Error::Quantization { .. } => "quantization",
        }
    }
}
