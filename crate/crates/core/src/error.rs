//! Error type shared by every module of the crate.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("{malformed} of {lines} lines malformed; wrong --format?")]
    FormatError { lines: usize, malformed: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate hyperplane normal (raw norm {0:e})")]
    DegenerateNormal(f64),

    #[error("normal vector is not unit length (norm {0})")]
    NonUnitNormal(f64),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("only {eligible} eligible negatives, {requested} requested")]
    ExhaustedCandidates { eligible: usize, requested: usize },

    #[error("non-finite gradient at epoch {epoch}, step {step}")]
    NonFiniteGradient { epoch: usize, step: usize },

    #[error("training split yields no transitions")]
    EmptyTrainingSet,

    #[error("test split yields no transitions")]
    EmptyTestSet,

    #[error("{kind} `{id}` is unknown to the model")]
    VocabMismatch { kind: &'static str, id: String },

    #[error("reports are not comparable: {0}")]
    MismatchedConfig(String),

    #[error("not a model archive (bad magic line)")]
    BadMagic,

    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),

    #[error("shape mismatch in section [{section}]: {detail}")]
    ShapeMismatch { section: String, detail: String },

    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
