//! End-to-end orchestration: configuration, the stage pipeline, the shared
//! statistical analysis and its report files, bundled reference tables, and
//! a synthetic corpus generator.

mod analysis;
mod config;
mod fixtures;
mod pipeline;
mod report;
pub mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

pub use analysis::{
    analyze, Analysis, GroupMean, IntraRecord, LabelRegression, RelationTriple, SingleSpecialtyRow,
    TrainSizeRow,
};
pub use config::{ExperimentConfig, ProjectionConfig};
pub use fixtures::{load_fixtures, reproduce_reference_stats, FixtureSet};
pub use pipeline::{
    run_experiment, run_stage, ExperimentResult, Manifest, Stage, STALE_MARKER,
};
pub use report::write_report;

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{field} path does not exist: {}", path.display())]
    MissingPath { field: String, path: PathBuf },
    #[error("{file} row {row}: {message}")]
    Fixture { file: String, row: usize, message: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
    #[error("analysis: {0}")]
    Analysis(String),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
