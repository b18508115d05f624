use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("node {id} is not on this tape ({len} nodes)")]
    UnknownNode { id: usize, len: usize },
    #[error("`{kind}` takes {expected} inputs, got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` nodes are leaves; create them with Tape::input or Tape::param")]
    LeafKind(&'static str),
    #[error("backward needs a scalar output but node {id} has shape {shape:?}")]
    NonScalarOutput { id: usize, shape: Vec<usize> },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` already exists")]
    DuplicateParam(String),
    #[error("branch gate must be a scalar, got shape {0:?}")]
    GateNotScalar(Vec<usize>),
    #[error("label {label} of node {node} is outside [0, {classes})")]
    LabelOutOfRange { node: usize, label: usize, classes: usize },
    #[error("loss mask selects no nodes")]
    EmptyMask,
    #[error("dropout probability {0} is outside [0, 1)")]
    InvalidProbability(f64),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("unknown node kind `{0}`")]
    UnknownKind(String),
    #[error("malformed tape dump, line {line}: {reason}")]
    Dump { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
