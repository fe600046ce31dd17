//! Command-line runner for `homog-core`: JSON configs, CSV/JSON output,
//! the verification suite and the `homog` binary's subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

/// Failures, each with a fixed process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("property failure: {0}")]
    Property(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Property(_) => 4,
        }
    }
}

impl From<homog_core::Error> for CliError {
    fn from(e: homog_core::Error) -> Self {
        match e {
            homog_core::Error::InvalidParameter(_) | homog_core::Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

/// Sizes the global rayon pool from `HOMOG_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("HOMOG_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("HOMOG_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Config("HOMOG_THREADS must be positive".into()));
        }
        // A second initialization (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
