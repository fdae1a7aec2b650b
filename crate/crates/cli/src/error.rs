//! Tool-level errors and the process exit-code contract.

use std::path::Path;

use thiserror::Error;

/// A failure surfaced to the user. The variant fixes the exit code:
/// 1 for validation problems (bad arguments, bad config, malformed or
/// inconsistent input files), 2 for I/O problems (unreadable or
/// unwritable paths), 3 for numerical failures (singular covariance,
/// degenerate statistics).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Wrap a filesystem error with the path it concerns.
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// A validation error pinned to a 1-based line of a text file.
    pub fn at_line(path: &Path, line: usize, what: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}:{line}: {what}", path.display()))
    }
}

/// Whether a library error describes a numerical breakdown (as opposed
/// to invalid input). Row wrappers classify by their source.
fn is_numerical(err: &ftmf_core::Error) -> bool {
    use ftmf_core::Error as E;
    match err {
        E::NotPositiveDefinite { .. }
        | E::DegenerateQuadratic
        | E::UndefinedStatistic(_)
        | E::NonFiniteScore { .. } => true,
        E::AtRow { source, .. } => is_numerical(source),
        _ => false,
    }
}

impl From<ftmf_core::Error> for CliError {
    fn from(err: ftmf_core::Error) -> Self {
        let message = err.to_string();
        if is_numerical(&err) {
            CliError::Numerical(message)
        } else {
            CliError::Validation(message)
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
