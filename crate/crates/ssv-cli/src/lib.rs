//! Pipeline orchestration for the speaker verification crate.
//!
//! Every experiment stage is a subcommand of the `ssv` binary, with a
//! single JSON config, file-based handoff between stages, and
//! deterministic seeds: the same config and seed always reproduce the
//! same artifact bytes. The `pipeline` subcommand chains all stages from
//! synthetic corpus to the final fused metrics.

pub mod artifact;
pub mod config;
pub mod fragments;
pub mod stages;

use std::path::PathBuf;
use thiserror::Error;

/// CLI failure modes, split by exit code: a missing input file exits 2
/// with the path; everything else (bad config, format errors, training
/// blow-ups) exits 3 with diagnostics.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input: {0}")]
    MissingInput(PathBuf),
    #[error(transparent)]
    Invalid(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) => 2,
            CliError::Invalid(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Errors unless `path` names an existing file.
pub fn require_file(path: &std::path::Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// Errors unless `path` names an existing directory.
pub fn require_dir(path: &std::path::Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// Wraps any library error into the validation-failure class.
pub fn invalid(err: impl std::error::Error + Send + Sync + 'static) -> CliError {
    CliError::Invalid(anyhow::Error::new(err))
}
