//! Data side of the stance-detection workbench: conversation corpora,
//! human annotation, prompt construction and evaluation metrics.
//!
//! The numerical model lives in `stancebench-model`; everything here is
//! plain data processing and is independent of it.

pub mod annotation;
pub mod corpus;
pub mod eval;
pub mod label;
pub mod prompt;
pub mod util;

pub use label::StanceLabel;
