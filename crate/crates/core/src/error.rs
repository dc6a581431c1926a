use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("token {token:?} is not in the alphabet {alphabet:?}")]
    UnknownToken { token: char, alphabet: Vec<char> },

    #[error("alphabet mismatch: {left:?} vs {right:?}")]
    AlphabetMismatch { left: Vec<char>, right: Vec<char> },

    #[error("malformed automaton: {0}")]
    Malformed(String),

    #[error("state {0} has already been merged away")]
    DeletedState(usize),

    #[error("invalid Tomita language id {0} (expected 1..=7)")]
    InvalidLanguage(u8),

    #[error("language {language} has no strings of length {length}")]
    Infeasible { language: u8, length: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Divergence {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("k-means needs at least {k} distinct points, got {points}")]
    TooFewPoints { k: usize, points: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
