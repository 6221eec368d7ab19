use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Consistency(String),
    #[error("config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("{message}")]
    Trace { rule: &'static str, message: String },
    #[error(transparent)]
    Core(#[from] nicknet_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable class, used in the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Consistency(_) => "consistency",
            Error::Config { .. } => "config",
            Error::Trace { .. } => "trace",
            Error::Core(e) => e.kind(),
            Error::Csv(_) => "csv",
        }
    }
}
