use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown solver `{name}` (registered: {})", known.join(", "))]
    UnknownSolver { name: String, known: Vec<String> },

    #[error("solver `{0}` is already registered")]
    DuplicateSolver(String),

    #[error("unknown parameter `{path}`{}", suggestion_suffix(suggestions))]
    UnknownParameter {
        path: String,
        suggestions: Vec<String>,
    },

    #[error("type mismatch for `{path}`: expected {expected}, got {found}")]
    TypeMismatch {
        path: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("cannot add `{0}`: parameter structure is frozen")]
    Frozen(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical divergence at iteration {iteration}: non-finite values in `{field}`")]
    Divergence { iteration: usize, field: String },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("params digest mismatch: snapshot has {found}, simulation has {expected}")]
    Digest { expected: String, found: String },

    #[error("missing records: {0}")]
    MissingRecords(String),

    #[error("no snapshot near t = {time} in {dir}")]
    NoSnapshot { time: f64, dir: PathBuf },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
