//! Library half of the command-line front end: configuration schema and file
//! emission, shared by the binary and the integration tests.

pub mod config;
pub mod output;

/// CLI failure classes, one per process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, arguments, or file system trouble (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// A run aborted on non-finite values or a physicality floor (exit 3).
    #[error("numerical failure: {0}")]
    Numerics(String),
    /// A study completed but too many cells failed for its fit to stand
    /// (exit 4).
    #[error("study invalid: {0}")]
    InvalidStudy(String),
}

impl CliError {
    pub fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::InvalidStudy(_) => 4,
        }
    }

    /// Core errors raised while checking inputs (shapes, grids, kernels).
    pub fn from_core_config(e: unravel_core::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Core errors raised while running: numerical aborts keep their class,
    /// anything else was a rejected input.
    pub fn from_core_run(e: unravel_core::Error) -> Self {
        match e {
            unravel_core::Error::Numerics { .. } => CliError::Numerics(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
