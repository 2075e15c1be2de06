//! Command-line front end for the estimator library: training runs, seeded
//! sampling, Parzen evaluation, latent interpolation, and the numerical
//! verification suites, with bit-exact file formats throughout.

use thiserror::Error;

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod ppm;
pub mod report;
pub mod verify;

/// Errors split by exit status: configuration/input problems exit 2,
/// runtime failures (divergence, failing checks) exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}
