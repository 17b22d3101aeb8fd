use serde::{Deserialize, Serialize};

use crate::autograd::Precision;
use crate::ModelError;

/// Decoder and adapter hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Fusion width; projected visual rows and token embeddings share it.
    pub d_v: usize,
    pub layers: usize,
    pub heads: usize,
    pub vocabulary_size: usize,
    pub max_len: usize,
    pub lora_rank: usize,
    /// Defaults to `lora_rank` (scale 1) when absent.
    pub lora_alpha: Option<f64>,
    pub ffn_mult: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_v: 64,
            layers: 2,
            heads: 4,
            vocabulary_size: 262,
            max_len: 1024,
            lora_rank: 4,
            lora_alpha: None,
            ffn_mult: 4,
            seed: 0,
            precision: Precision::F64,
        }
    }
}

impl ModelConfig {
    pub fn lora_scale(&self) -> f64 {
        self.lora_alpha.unwrap_or(self.lora_rank as f64) / self.lora_rank as f64
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::ConfigInvalid(m));
        if self.d_v == 0 || self.heads == 0 || self.d_v % self.heads != 0 {
            return bad(format!("d_v={} must be a positive multiple of heads={}", self.d_v, self.heads));
        }
        if self.lora_rank == 0 || self.lora_rank > self.d_v {
            return bad(format!("lora_rank={} must lie in 1..={}", self.lora_rank, self.d_v));
        }
        if self.vocabulary_size != 262 {
            return bad(format!("vocabulary_size must be 262 (got {})", self.vocabulary_size));
        }
        if self.max_len < 8 {
            return bad(format!("max_len={} is too small", self.max_len));
        }
        if self.ffn_mult == 0 {
            return bad("ffn_mult must be positive".into());
        }
        if let Some(alpha) = self.lora_alpha {
            if !(alpha.is_finite() && alpha > 0.0) {
                return bad(format!("lora_alpha={alpha} must be positive"));
            }
        }
        Ok(())
    }
}

/// Frozen patch encoder hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisionConfig {
    /// Images are resized to `image_size × image_size`.
    pub image_size: usize,
    pub patch_size: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    /// Feed only the class-token feature to the fusion sequence.
    pub class_token_only: bool,
    /// How many post images are encoded per instance.
    pub max_images: usize,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            patch_size: 4,
            width: 32,
            layers: 2,
            heads: 4,
            class_token_only: false,
            max_images: 1,
        }
    }
}

impl VisionConfig {
    pub fn num_patches(&self) -> usize {
        (self.image_size / self.patch_size).pow(2)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    /// Visual rows contributed per image.
    pub fn tokens_per_image(&self) -> usize {
        if self.class_token_only {
            1
        } else {
            self.num_patches() + 1
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::ConfigInvalid(m));
        if self.patch_size == 0 || self.image_size == 0 || self.image_size % self.patch_size != 0 {
            return bad(format!(
                "image_size={} must be a positive multiple of patch_size={}",
                self.image_size, self.patch_size
            ));
        }
        if self.heads == 0 || self.width == 0 || self.width % self.heads != 0 {
            return bad(format!("width={} must be a positive multiple of heads={}", self.width, self.heads));
        }
        Ok(())
    }
}
