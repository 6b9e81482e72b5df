use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{origin}, line {line}: {message}")]
    Parse {
        origin: String,
        line: u64,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] protoselect::Error),

    #[error("{0} guarantee violation(s)")]
    Violations(usize),
}

impl CliError {
    /// Process exit code: 1 input, 2 solver, 3 enumeration guard, 4 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(protoselect::Error::Solver(_))
            | CliError::Core(protoselect::Error::Selection { .. }) => 2,
            CliError::Core(protoselect::Error::Guard(_)) => 3,
            CliError::Violations(_) => 4,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
