use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] cavity_core::Error),
}

impl CliError {
    /// Short machine-readable category for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Invalid(_) => "validation",
            CliError::Model(cavity_core::Error::Ensemble { .. }) => "trajectory",
            CliError::Model(_) => "model",
        }
    }
}
