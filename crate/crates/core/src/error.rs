use thiserror::Error;

use evtgan_nnet::NnError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("undefined estimate: {0}")]
    Undefined(String),
    #[error("insufficient exceedances: {0}")]
    InsufficientExceedances(String),
    #[error("underdetermined fit: {0}")]
    Underdetermined(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("data format: {0}")]
    Format(String),
    #[error("fit quality: {0}")]
    Quality(String),
    #[error("state error: {0}")]
    State(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("unknown {kind} '{name}' (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
