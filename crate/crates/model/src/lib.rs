//! Desk-scale multimodal stance model: patch encoder, fusion decoder with
//! low-rank adapters, training and label matching.

pub mod autograd;
mod block;
pub mod checkpoint;
pub mod config;
mod error;
pub mod fusion;
pub mod lora;
pub mod matching;
pub mod params;
pub mod train;
pub mod vision;

pub use config::{ModelConfig, VisionConfig};
pub use error::ModelError;
pub use fusion::{assemble_input, FusionInput, MultimodalModel};
pub use matching::{match_label, MatchMethod, Prediction};
