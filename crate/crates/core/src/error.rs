use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A single problem found while validating a scenario configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number, when the issue can be tied to a location.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self::new(None, message)
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (density beyond
    /// jam density, flux above capacity, negative ratio, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A fundamental diagram violates a modelling assumption such as
    /// unimodality.
    #[error("model error: {0}")]
    Model(String),

    /// A traffic state is inconsistent with its diagram or with another state.
    #[error("state error: {0}")]
    State(String),

    /// An internal consistency check failed; signals a solver bug.
    #[error("logic error: {0}")]
    Logic(String),

    #[error("configuration error:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(vec![ConfigIssue::general(message)])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
