//! Library half of the `stancebench` command: run configuration, the
//! instance-to-prediction pipeline, evaluation protocols and manifests.

pub mod config;
mod error;
pub mod manifest;
pub mod pipeline;
pub mod protocol;

pub use config::RunConfig;
pub use error::WorkbenchError;
