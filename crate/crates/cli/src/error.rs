use thiserror::Error;

use crate::runfile::ParseError;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("relation error: {0}")]
    Relation(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Parse(_) => 2,
            Self::Relation(_) => 3,
            Self::Solver(_) => 4,
            Self::Io(_) => 5,
            Self::Verify(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Parse(_) => "parse",
            Self::Relation(_) => "relation",
            Self::Solver(_) => "solver",
            Self::Io(_) => "io",
            Self::Verify(_) => "verify",
        }
    }

    pub fn solver(e: impl std::fmt::Display) -> Self {
        Self::Solver(e.to_string())
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}
