use std::path::Path;

use evtgan::nnet::NnError;
use evtgan::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const CONVERGENCE: i32 = 4;
    pub const INTERNAL: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("internal: {0}")]
    Internal(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::DATA,
            CliError::Internal(_) => exit::INTERNAL,
            CliError::Core(e) => core_code(e.root()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::Core(Error::Nn(e))
    }
}

fn core_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::UnknownStrategy { .. } => exit::USAGE,
        Error::Domain(_)
        | Error::DegenerateData(_)
        | Error::Undefined(_)
        | Error::InsufficientExceedances(_)
        | Error::Underdetermined(_)
        | Error::Shape(_)
        | Error::Format(_)
        | Error::State(_)
        | Error::Io(_) => exit::DATA,
        Error::Quality(_) => exit::CONVERGENCE,
        Error::Nn(NnError::Divergence { .. }) => exit::CONVERGENCE,
        Error::Nn(NnError::Format(_) | NnError::Io(_) | NnError::Shape(_)) => exit::DATA,
        Error::Nn(NnError::Spec(_)) => exit::USAGE,
        Error::Nn(_) | Error::Internal(_) | Error::Stage { .. } => exit::INTERNAL,
    }
}
