use std::path::PathBuf;

use sobolev_wlab::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for failed searches and numerical failures, 2 for usage and range
    /// errors, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                CoreError::RangeViolation { .. }
                | CoreError::ParameterOutOfRange(_)
                | CoreError::UnknownCatalogId(_)
                | CoreError::MalformedFieldSpec(_)
                | CoreError::InvalidSpec(_)
                | CoreError::OracleUnavailable(_) => 2,
                _ => 1,
            },
        }
    }
}
