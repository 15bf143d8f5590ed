use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(#[from] evlhts::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for everything
    /// that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
