//! Stance metrics (per-class F1 and F1-avg), depth-bucket breakdowns and
//! paired bootstrap significance testing.

mod bootstrap;
mod depth;
mod metrics;
mod table;

pub use bootstrap::{paired_bootstrap, SignificanceResult};
pub use depth::{depth_bucket_report, DepthBucket, DepthBucketReport, TargetKind};
pub use metrics::{
    evaluate, f1_avg, f1_class, read_predictions, write_predictions, ConfusionCounts, EvalReport, PredictionRecord,
    Scores,
};
pub use table::{render_depth_table, render_report_table};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions do not match gold ids (missing: {missing:?}, extra: {extra:?}, duplicated: {duplicated:?})")]
    PredictionGoldMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
        duplicated: Vec<String>,
    },
    #[error("gold instance `{0}` has no label")]
    MissingGold(String),
    #[error("instance `{instance_id}` has depth {depth}, outside the bucket range")]
    DepthOutOfRange { instance_id: String, depth: usize },
    #[error("bootstrap needs at least 100 resamples (got {0})")]
    TooFewResamples(usize),
    #[error("predictions file {path}: {message}")]
    PredictionsFile { path: String, message: String },
}

impl EvalError {
    pub fn name(&self) -> &'static str {
        match self {
            EvalError::PredictionGoldMismatch { .. } => "PredictionGoldMismatch",
            EvalError::MissingGold(_) => "MissingGold",
            EvalError::DepthOutOfRange { .. } => "DepthOutOfRange",
            EvalError::TooFewResamples(_) => "TooFewResamples",
            EvalError::PredictionsFile { .. } => "PredictionsFile",
        }
    }
}
