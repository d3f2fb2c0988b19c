use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown task family `{family}`")]
    UnknownFamily { path: PathBuf, line: usize, family: String },

    #[error("duplicate id `{id}`{}", location(.path, .line))]
    DuplicateId {
        id: String,
        path: Option<PathBuf>,
        line: Option<usize>,
    },

    #[error("unknown task family `{0}`")]
    UnknownFamilyKey(String),

    #[error("unknown prompt id `{0}`")]
    UnknownPrompt(String),

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot aggregate: {0}")]
    Aggregate(String),

    #[error("reports are not comparable: {0}")]
    Incomparable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &Option<PathBuf>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" at {}:{}", p.display(), l),
        (Some(p), None) => format!(" in {}", p.display()),
        _ => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's input rather than the environment.
    /// A missing input file counts as the caller's.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => true,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Decode { .. } => "decode",
            Error::Malformed { .. } => "malformed",
            Error::UnknownFamily { .. } | Error::UnknownFamilyKey(_) => "unknown_family",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::UnknownPrompt(_) => "unknown_prompt",
            Error::Policy(_) => "policy",
            Error::Config(_) => "config",
            Error::Aggregate(_) => "aggregate",
            Error::Incomparable(_) => "incomparable",
            Error::Io { .. } => "io",
        }
    }
}
