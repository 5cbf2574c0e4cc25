use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("data length {len} does not match shape {shape:?}")]
    BadLength { shape: Vec<usize>, len: usize },

    #[error("non-finite value produced by node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },

    #[error("non-finite {what}")]
    NonFiniteInput { what: &'static str },

    #[error("leaf `{0}` is not bound to a value")]
    UnboundLeaf(String),

    #[error("node {0} has no value; evaluate the tape first")]
    Unevaluated(usize),

    #[error("expected a scalar output, found shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("finite-difference step too small: every difference vanished while the analytic gradient did not")]
    StepTooSmall,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(
        "training diverged at generator iteration {iteration}: {what} is not finite (last good iteration: {last_good})"
    )]
    Diverged { iteration: usize, last_good: usize, what: &'static str },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
