//! One flat JSON run configuration; absent keys take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stancebench_core::corpus::FilterConfig;
use stancebench_core::prompt::{AblationFlags, PromptTemplateConfig};
use stancebench_model::{ModelConfig, VisionConfig};

use crate::manifest::sha256_hex;
use crate::WorkbenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            steps: 300,
            batch: 8,
        }
    }
}

/// Which part of the destination target a cross-target run is scored on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossScope {
    /// Every labeled instance of the destination.
    #[default]
    Full,
    /// Only the destination's test split.
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub max_new_tokens: usize,
    pub cross_scope: CrossScope,
    pub resamples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_new_tokens: 12,
            cross_scope: CrossScope::Full,
            resamples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub vision: VisionConfig,
    pub train: TrainConfig,
    pub prompt: PromptTemplateConfig,
    pub eval: EvalConfig,
    pub filters: FilterConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, WorkbenchError> {
        let text = std::fs::read_to_string(path).map_err(WorkbenchError::io(path))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| WorkbenchError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), WorkbenchError> {
        self.model.validate()?;
        self.vision.validate()?;
        self.prompt.validate()?;
        if !(self.train.lr.is_finite() && self.train.lr > 0.0) {
            return Err(WorkbenchError::Config(format!("train.lr={} must be positive", self.train.lr)));
        }
        if self.train.batch == 0 {
            return Err(WorkbenchError::Config("train.batch must be positive".into()));
        }
        Ok(())
    }

    /// Hash of everything except the ablation flags, which are reported
    /// separately so ablated runs share a configuration hash.
    pub fn hash(&self) -> String {
        let mut clean = self.clone();
        clean.prompt.ablation = AblationFlags::default();
        sha256_hex(&serde_json::to_vec(&clean).expect("config serialises"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"model": {"d_v": 32}, "train": {"steps": 5}}"#).unwrap();
        assert_eq!(c.model.d_v, 32);
        assert_eq!(c.model.heads, 4);
        assert_eq!(c.train.steps, 5);
        assert_eq!(c.train.batch, 8);
    }

    #[test]
    fn rank_above_width_is_rejected() {
        let c: RunConfig = serde_json::from_str(r#"{"model": {"d_v": 8, "heads": 2, "lora_rank": 16}}"#).unwrap();
        assert_eq!(c.validate().unwrap_err().name(), "ConfigInvalid");
    }

    #[test]
    fn ablation_does_not_change_hash() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.prompt.ablation.omit_caption = true;
        assert_eq!(a.hash(), b.hash());
        b.train.steps += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
