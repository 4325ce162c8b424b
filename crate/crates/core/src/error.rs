use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate verb lemma `{0}`")]
    DuplicateLemma(String),
    #[error("line {line}: unknown verb type tag `{tag}` (expected Manner or Result)")]
    UnknownVerbType { line: usize, tag: String },
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("verb index {index} out of range for vocabulary of {len} verbs")]
    VerbIndexOutOfRange { index: usize, len: usize },
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("no majority vote: every verb has zero selections")]
    NoVote,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty ground-truth set for video {0}")]
    EmptyGroundTruth(usize),
    #[error("vocabulary fingerprint mismatch: artifact has {found}, active vocabulary is {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("unknown video id `{0}`")]
    UnknownVideo(String),
    #[error("duplicate video id `{0}`")]
    DuplicateVideo(String),
    #[error("missing annotations for videos: {0:?}")]
    MissingAnnotations(Vec<String>),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
