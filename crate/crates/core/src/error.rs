use std::io;

use thiserror::Error;

use crate::tensor::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape { op: &'static str, left: Shape, right: Shape },

    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },

    #[error("index {index} out of range for vocabulary of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown label {label:?} (expected true, false or uncertain)")]
    UnknownLabel { line: usize, label: String },

    #[error("invalid sample {question_id}/{answer_id}: {reason}")]
    InvalidSample { question_id: String, answer_id: String, reason: String },

    #[error("split needs at least {need} questions, corpus has {got}")]
    TooFewQuestions { need: usize, got: usize },

    #[error("vocabulary of {available} content tokens is too small: {reason}")]
    VocabTooSmall { available: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("non-finite loss at epoch {epoch}, batch {batch}; parameter norms: {norms}")]
    NonFiniteLoss { epoch: usize, batch: usize, norms: String },

    #[error("gradient check: non-finite objective while probing {param}[{index}]")]
    NonFiniteProbe { param: String, index: usize },

    #[error("unsupported checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NonFiniteLoss { .. } | Error::NonFiniteProbe { .. }
        )
    }
}
