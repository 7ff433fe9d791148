use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(aoi_core::Error),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit code: 2 for configuration and i/o problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<aoi_core::Error> for CliError {
    fn from(e: aoi_core::Error) -> Self {
        use aoi_core::Error as E;
        match e {
            E::InvalidModel(_)
            | E::InvalidConfig(_)
            | E::InvalidPolicy(_)
            | E::InvalidSimConfig(_)
            | E::InvalidOptimizer(_)
            | E::InvalidK(_)
            | E::InvalidBeta(_)
            | E::InvalidRange(_) => CliError::Config(e.to_string()),
            E::TraceIo(m) => CliError::Io(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
