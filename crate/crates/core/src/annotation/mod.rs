//! Annotator records, gold-label aggregation, agreement statistics and the
//! leased task queue behind the annotation service.

mod aggregate;
mod kappa;
mod store;

pub use aggregate::{aggregate_gold, GoldOutcome};
pub use kappa::{cohen_kappa, polar_pairs};
pub use store::{
    AgreementReport, AnnotationStore, Clock, ProgressReport, SystemClock, TargetAgreement, TaskLease,
    TaskView, UtteranceView, DEFAULT_LEASE_MINUTES,
};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::StanceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Round {
    First,
    Second,
    TieBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub instance_id: String,
    pub annotator_id: String,
    pub label: StanceLabel,
    pub vision_related: bool,
    pub submitted_at: DateTime<Utc>,
    pub round: Round,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("instance needs at least two initial annotations (has {0})")]
    NeedsMoreAnnotators(usize),
    #[error("no label pairs remain after restricting to favor/against")]
    NoEligiblePairs,
    #[error("both raters are constant on the same label; kappa is undefined")]
    DegenerateMarginals,
    #[error("annotator `{annotator_id}` holds no valid lease on `{instance_id}`")]
    LeaseInvalid {
        annotator_id: String,
        instance_id: String,
    },
    #[error("annotator `{annotator_id}` already labeled `{instance_id}`")]
    AlreadyLabeled {
        annotator_id: String,
        instance_id: String,
    },
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("unknown thread `{0}`")]
    UnknownThread(String),
    #[error("annotation log {path}: {message}")]
    Log { path: String, message: String },
}

impl AnnotationError {
    pub fn name(&self) -> &'static str {
        match self {
            AnnotationError::NeedsMoreAnnotators(_) => "NeedsMoreAnnotators",
            AnnotationError::NoEligiblePairs => "NoEligiblePairs",
            AnnotationError::DegenerateMarginals => "DegenerateMarginals",
            AnnotationError::LeaseInvalid { .. } => "LeaseInvalid",
            AnnotationError::AlreadyLabeled { .. } => "AlreadyLabeled",
            AnnotationError::UnknownInstance(_) => "UnknownInstance",
            AnnotationError::UnknownThread(_) => "UnknownThread",
            AnnotationError::Log { .. } => "AnnotationLog",
        }
    }
}
