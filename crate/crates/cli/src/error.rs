use thiserror::Error;

/// Failures surfaced by the command-line front end, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] pyramid_core::Error),

    /// A failure inside one replication of a study.
    #[error("replication {index} (n = {n}): {source}")]
    Replication {
        index: usize,
        n: usize,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    /// 2 for configuration, 3 for data, 4 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        use pyramid_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Usage(_) | E::Input(_) | E::Capacity { .. }) => 2,
            CliError::Core(E::Data { .. } | E::Io(_)) => 3,
            CliError::Core(E::Numerical { .. }) => 4,
            CliError::Replication { source, .. } => source.exit_code(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}
