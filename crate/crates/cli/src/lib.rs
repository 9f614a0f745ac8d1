//! Pipeline orchestration: a config-driven experiment runner plus one
//! subcommand per stage, each reading its predecessor's artifacts and
//! stamping its own with the resolved config's hash.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod report;
pub mod stages;

pub use config::{
    apply_override, format_offset, parse_model, parse_offset, parse_schema, resolve, DataSource,
    ExperimentConfig, FoldConfig, Overrides,
};
pub use report::{render_counts, render_report};
pub use stages::{
    run_experiment, stage_evaluate, stage_featurize, stage_flow, stage_ingest, stage_split,
    stage_train, DirLock, StagePaths,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: expected {}", .path.display())]
    MissingArtifact { path: PathBuf },
    #[error(
        "{} was written by config {found}, the current config is {expected}; \
         rerun the earlier stages or restore the original config",
        .path.display()
    )]
    HashMismatch { path: PathBuf, found: String, expected: String },
    #[error("output directory {} is locked by a running experiment", .dir.display())]
    Locked { dir: PathBuf },
    #[error("{stage} stage: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Exit code contract: 2 for configuration mistakes the user can fix by
    /// changing flags or the config file, 1 for everything that went wrong
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn stage_err(stage: &'static str, err: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage { stage, message: err.to_string() }
}
