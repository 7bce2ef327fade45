use std::fmt;

/// Failure of one command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config file or override (exit 1).
    Usage(String),
    /// Unreadable or inconsistent data (exit 2).
    Data(String),
    /// Divergence or a failed self-check (exit 3).
    Failed(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Failed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<evdvsr_model::Error> for CliError {
    fn from(e: evdvsr_model::Error) -> Self {
        use evdvsr_model::Error as E;
        match e {
            E::Divergence { .. } => CliError::Failed(e.to_string()),
            E::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<evdvsr_core::Error> for CliError {
    fn from(e: evdvsr_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub(crate) fn io_err(what: impl fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Data(format!("{what}: {e}"))
}
