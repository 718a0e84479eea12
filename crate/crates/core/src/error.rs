use std::fmt;

use crate::cfg::ValidationReport;

/// Location-tagged syntax error from one of the line-oriented text formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub(crate) fn eof(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("invalid control-flow graph: {0}")]
    InvalidCfg(ValidationReport),

    #[error("inference graph has a cycle through {0:?}")]
    CyclicInference(Vec<String>),

    #[error("profile domain mismatch (missing: {missing:?}, extra: {extra:?})")]
    DomainMismatch { missing: Vec<String>, extra: Vec<String> },

    #[error("{what} has {actual} elements, limit is {limit}")]
    SizeGuard { what: &'static str, limit: usize, actual: usize },

    #[error("malformed scheme document: {0}")]
    Document(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
