use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Core(#[from] cwrmt::Error),
}

impl CliError {
    /// Process exit status. 1 is reserved for failed tolerances.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 3,
            CliError::Core(cwrmt::Error::Resource(_)) => 4,
            CliError::Core(cwrmt::Error::Config(_)) => 2,
            CliError::Core(cwrmt::Error::UnsupportedEnsemble(_)) => 6,
            CliError::Core(_) => 5,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
