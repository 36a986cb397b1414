use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unbalanced delimiters: {0}")]
    UnbalancedDelimiters(String),
    #[error("comment is empty after stripping markup")]
    EmptyComment,
    #[error("no method signature found")]
    NoSignature,
    #[error("old and new comments are identical")]
    NoDistinctChange,
    #[error("malformed edit sequence: {0}")]
    MalformedEditSequence(String),
    #[error("anchor not found ahead of position {position}: {span}")]
    AnchorNotFound { position: usize, span: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("vocabulary missing: {0}")]
    VocabularyMissing(String),
    #[error("need at least 3 projects to partition, found {0}")]
    InsufficientProjects(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
