use tropic_core::Error as CoreError;

/// Failures of a command, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Format(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io { .. } | CliError::Failed(_) => 1,
        }
    }

    /// Attaches the name of the object being processed to structural errors.
    pub fn within(self, what: &str) -> Self {
        match self {
            CliError::Format(m) => CliError::Format(format!("{what}: {m}")),
            CliError::Failed(m) => CliError::Failed(format!("{what}: {m}")),
            other => other,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Budget { .. } => CliError::Budget(e.to_string()),
            CoreError::Invalid(_) | CoreError::Infeasible(_) => CliError::Failed(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}
