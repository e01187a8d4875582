//! Files, command line and Monte Carlo harness around [`photomesh_core`].
//!
//! - [`files`]: versioned JSON documents (`mesh-v1`, `emu-v1`, `cal-v1`,
//!   `circuit-v1`, `met-v1`, `graph-v1`) and CSV exports.
//! - [`config`]: run and lattice configuration files.
//! - [`pipeline`]: sample, calibrate and measure chips, alone or in ensembles.
//! - [`cli`]: the `photomesh` subcommands and their run manifests.

pub mod cli;
pub mod config;
pub mod files;
pub mod manifest;
pub mod pipeline;

pub use photomesh_core;

/// Failures surfaced by the command line, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input files.
    #[error("{0}")]
    Usage(String),
    #[error("write failed: {0}")]
    Io(String),
    #[error(transparent)]
    Domain(#[from] photomesh_core::Error),
    /// A run that finished but did not succeed, e.g. nodes that failed calibration.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 1 for domain failures, 2 for usage and configuration errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) | CliError::Failed(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}
