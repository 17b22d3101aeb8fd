//! Conversation threads, preprocessing filters, stance instances, corpus
//! statistics and leakage-free splits.

mod filter;
mod instance;
mod split;
mod stats;
mod thread;

pub use filter::{
    apply_preprocess_filters, apply_preprocess_filters_with, DropReason, FilterConfig,
    FilterDecision, LanguageCheck, LatinScriptCheck,
};
pub use instance::{
    flatten_to_instances, read_instances, write_instances, Instance, InstanceRecord, Split,
    TargetSpec, MAX_DEPTH, POST_TARGET_GROUP,
};
pub use split::{split_corpus, SplitAssignment, SplitRatios};
pub use stats::{compute_corpus_stats, CorpusStats, DepthStats, TargetStats, VisionDiscrepancy};
pub use thread::{parse_thread_file, parse_threads, ConversationThread, Utterance};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed thread record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("utterance `{utterance_id}` references a missing parent")]
    DanglingParent { utterance_id: String },
    #[error("thread `{thread_id}` contains a reply cycle")]
    Cycle { thread_id: String },
    #[error("thread `{thread_id}` must contain exactly one post (found {found})")]
    PostCount { thread_id: String, found: usize },
    #[error("duplicate utterance id `{utterance_id}` in thread `{thread_id}`")]
    DuplicateUtterance {
        thread_id: String,
        utterance_id: String,
    },
    #[error("utterance `{utterance_id}` has no words")]
    EmptyUtterance { utterance_id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("instance `{instance_id}` has no gold label")]
    MissingGold { instance_id: String },
    #[error("target `{target}` has only {threads} thread(s); at least 3 are required")]
    InsufficientThreads { target: String, threads: usize },
    #[error("split ratios must be non-negative and sum to 1 (got {0:?})")]
    InvalidRatios([f64; 3]),
    #[error("invalid instance record `{instance_id}`: {message}")]
    InvalidInstance { instance_id: String, message: String },
}

impl CorpusError {
    /// Stable error category name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "Io",
            CorpusError::Malformed { .. } => "Malformed",
            CorpusError::DanglingParent { .. } => "DanglingParent",
            CorpusError::Cycle { .. } => "Cycle",
            CorpusError::PostCount { .. } => "PostCount",
            CorpusError::DuplicateUtterance { .. } => "DuplicateUtterance",
            CorpusError::EmptyUtterance { .. } => "EmptyUtterance",
            CorpusError::EmptyCorpus => "EmptyCorpus",
            CorpusError::MissingGold { .. } => "MissingGold",
            CorpusError::InsufficientThreads { .. } => "InsufficientThreads",
            CorpusError::InvalidRatios(_) => "InvalidRatios",
            CorpusError::InvalidInstance { .. } => "InvalidInstance",
        }
    }
}
