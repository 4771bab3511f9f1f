use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line or configuration; exit code 2.
    #[error("usage error: {0}")]
    Usage(String),

    /// The computation itself failed; exit code 3.
    #[error(transparent)]
    Compute(#[from] pathint::Error),

    /// A verification run exceeded its tolerance; exit code 1.
    #[error("verification failed: max |difference| {max_diff:e} > tolerance {tolerance:e}")]
    Mismatch { max_diff: f64, tolerance: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Io(_) | CliError::Csv(_) => 3,
        }
    }
}
