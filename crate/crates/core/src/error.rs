use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    CorpusLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary size {requested} is too small; at least {minimum} is required for the fixed blocks and the alphabet")]
    VocabularyTooSmall { requested: usize, minimum: usize },

    #[error("whitespace surgery needs {needed} regular pieces but only {available} were learned")]
    InsufficientRegularPieces { needed: usize, available: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid model: {0}")]
    Model(#[from] ModelError),

    #[error("token id {id} is out of range for a vocabulary of {size} pieces")]
    IdOutOfRange { id: u32, size: usize },

    #[error("byte pieces starting at position {position} do not form valid UTF-8")]
    InvalidUtf8 { position: usize },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Structural problems found while validating a tokenizer model.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("special piece order violates the reserved layout: expected {expected:?} at id {id}, found {found:?}")]
    SpecialOrder {
        id: usize,
        expected: String,
        found: String,
    },

    #[error("vocabulary blocks are out of order at id {id}: {kind} follows {previous}")]
    BlockOrder {
        id: usize,
        kind: &'static str,
        previous: &'static str,
    },

    #[error("{block} block has {found} pieces, expected {expected}")]
    BlockSize {
        block: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("piece at id {id} ({surface:?}) does not match its {kind} block: {reason}")]
    BadPiece {
        id: usize,
        surface: String,
        kind: &'static str,
        reason: String,
    },

    #[error("duplicate piece surface {0:?}")]
    DuplicateSurface(String),

    #[error("empty piece surface at id {0}")]
    EmptySurface(usize),

    #[error("merge rank {rank}: {reason}")]
    Merge { rank: usize, reason: String },

    #[error("vocabulary has {found} pieces but the configuration asks for {expected}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}
