//! Experiment harness: runs configured tasks against `sdl-core` and writes
//! CSV tables, a JSON summary and a JSON manifest per run.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod sweep;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use run::{run_config, run_task, Check, Manifest, RunStatus, Summary};
pub use sweep::{sweep_dir, SweepEntry};

/// Variable holding the worker thread count for sweeps.
pub const THREADS_ENV: &str = "SDL_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad domain parameters or an unwritable output directory.
    #[error("validation error: {0}")]
    Validation(String),
    /// A solver or optimizer failed while executing a valid config.
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn from_validation(e: sdl_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn from_solver(e: sdl_core::Error) -> Self {
        CliError::Solver(e.to_string())
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{what}: {m}")),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

/// Thread count from [`THREADS_ENV`], defaulting to the available parallelism.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::validation(format!("{THREADS_ENV} must be a positive integer (got {v:?})"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
