use edgemarket_core::mappo::MappoError;
use edgemarket_core::simenv::SimError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {field} {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Mappo(#[from] MappoError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("no `{metric}` series to plot: records empty or metric unknown")]
    EmptyRecords { metric: String },
    #[error("market property violations:\n{summary}")]
    PropertyViolation { summary: String },
}

impl CliError {
    /// Stable identifier for the machine-readable error line.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Invalid { .. } => "invalid-config",
            CliError::Parse { .. } => "parse-error",
            CliError::Sim(_) => "sim-error",
            CliError::Mappo(MappoError::VersionMismatch { .. }) => "checkpoint-version",
            CliError::Mappo(MappoError::CorruptCheckpoint { .. }) => "checkpoint-corrupt",
            CliError::Mappo(MappoError::InvalidConfig { .. }) => "invalid-config",
            CliError::Mappo(_) => "run-error",
            CliError::Io { .. } => "io-error",
            CliError::EmptyRecords { .. } => "empty-records",
            CliError::PropertyViolation { .. } => "property-violation",
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
