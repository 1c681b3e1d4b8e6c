use alloc::string::String;

use crate::corpus::Role;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dataset role mismatch: {0:?} vs {1:?}")]
    RoleMismatch(Role, Role),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown transfer mode `{0}`")]
    UnknownMode(String),
    #[error("id {id} out of range for size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(
        "vocabulary hash mismatch: checkpoint has {expected:016x}, vocabulary is {found:016x}"
    )]
    VocabMismatch { expected: u64, found: u64 },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = core::result::Result<T, Error>;
