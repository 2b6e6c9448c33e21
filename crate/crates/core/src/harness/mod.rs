//! Class-incremental benchmark harness: dataset split, protocol runner,
//! synthetic data, op counting, configuration and reports.

mod config;
mod learners;
mod manifest;
mod pipeline;
mod protocol;
mod report;
mod split;
mod synth;

pub use config::{
    apply_override, parse_window, ClassSet, Config, ExtractorConfig, IngestConfig, ProtocolSection, SynthConfig,
};
pub use learners::{build_learner, LearnerConfig, LearnerKind};
pub use manifest::{Manifest, ManifestEntry};
pub use pipeline::{count_ops, Extractor, OpCounts};
pub use protocol::{
    group_by_class, plan_episode, run_incremental, to_feature_set, ClassPlan, Episode, ProtocolConfig, RunReport, Shots,
};
pub use report::{
    format_bench_table, format_table, mean_std, records, run_grid, summarize, write_bench_csv, write_jsonl,
    write_summary_csv, BenchRow, LearnerSummary, RunRecord,
};
pub use split::{split_classes, DatasetSplit, HoldoutRule};
pub use synth::{
    bresenham, class_centers, synth_events, synth_features, FeaturesByClass, LabeledClip, SynthEventSpec,
    SynthFeatureSpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error(transparent)]
    Ingest(#[from] crate::event_ingest::IngestError),
    #[error(transparent)]
    Snn(#[from] crate::snn::SnnError),
    #[error(transparent)]
    Norm(#[from] crate::agg_norm::NormError),
    #[error(transparent)]
    Clp(#[from] crate::clp::ClpError),
    #[error(transparent)]
    Learner(#[from] crate::learner::LearnerError),
    #[error(transparent)]
    Features(#[from] crate::baselines::FeatureError),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Errors caused by the invocation rather than the computation: bad
    /// configuration, missing inputs, unreadable files.
    pub fn is_usage(&self) -> bool {
        use crate::learner::LearnerError;
        match self {
            HarnessError::Config(_) | HarnessError::MissingData(_) | HarnessError::File { .. } => true,
            HarnessError::Ingest(e) => matches!(e, crate::event_ingest::IngestError::Config(_)),
            HarnessError::Norm(e) => matches!(e, crate::agg_norm::NormError::Config(_)),
            HarnessError::Clp(e) => matches!(e, crate::clp::ClpError::Config(_)),
            HarnessError::Learner(e) => matches!(e, LearnerError::Config(_)),
            _ => false,
        }
    }

    pub fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::File {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
