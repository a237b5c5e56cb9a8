use grover_decoherence::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Range(String),
    #[error("{0}")]
    Memory(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Range(_) => 3,
            CliError::Memory(_) => 4,
            CliError::Validation(_) => 5,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Internal(_) => "internal",
            CliError::Usage(_) => "usage",
            CliError::Range(_) => "range",
            CliError::Memory(_) => "memory",
            CliError::Validation(_) => "validation",
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => CliError::Range(e.to_string()),
            Error::MemoryGuard { .. } => CliError::Memory(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}
