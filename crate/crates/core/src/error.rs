use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: invalid UTF-8 on line {line}")]
    Encoding { path: String, line: usize },

    #[error("invalid word {word:?}: {reason}")]
    InvalidWord { word: String, reason: &'static str },

    #[error("no grapheme rule covers {} at offset {offset} of {word:?}", crate::unicode::format_codepoint(*.codepoint))]
    Conversion {
        word: String,
        codepoint: char,
        offset: usize,
    },

    #[error("rule set contains a cycle: {}", .0.iter().map(|c| crate::unicode::format_codepoint(*c)).collect::<Vec<_>>().join(" -> "))]
    Cycle(Vec<char>),

    #[error("rule set has more than one rule for source {}", crate::unicode::format_codepoint(*.0))]
    DuplicateSource(char),

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("unknown rule id {0:?}")]
    UnknownRule(String),

    #[error("session state: {0}")]
    State(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code used in structured error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Encoding { .. } => "encoding",
            Error::InvalidWord { .. } => "invalid_word",
            Error::Conversion { .. } => "conversion",
            Error::Cycle(_) => "cycle",
            Error::DuplicateSource(_) => "duplicate_source",
            Error::InvalidRule(_) => "invalid_rule",
            Error::UnknownRule(_) => "unknown_rule",
            Error::State(_) => "state",
            Error::Validation(_) => "validation",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
