use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown slot `{slot}`{}", at_line(*.line))]
    UnknownSlot { slot: String, line: Option<usize> },

    #[error(
        "invalid emotion label `{label}`{}; expected one of: neutral, satisfied, dissatisfied, excited, apologetic, fearful, abusive",
        at_line(*.line)
    )]
    BadLabel { label: String, line: Option<usize> },

    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("label index {index} out of range for {classes} classes")]
    LabelOutOfRange { index: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
