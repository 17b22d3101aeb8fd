//! Instance → prompt → model input, plus the training and prediction loops.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use stancebench_core::corpus::Instance;
use stancebench_core::eval::PredictionRecord;
use stancebench_core::prompt::{build_prompt_bundle, stub_caption_for, tokenize, PromptBundle, PromptTemplateConfig};
use stancebench_model::autograd::Mat;
use stancebench_model::train::{train_step, OptimizerConfig, TrainExample, TrainState};
use stancebench_model::vision::load_image;
use stancebench_model::{match_label, MultimodalModel};

use crate::config::TrainConfig;
use crate::WorkbenchError;

/// Where images and stored captions come from.
#[derive(Debug, Clone, Default)]
pub struct MediaSource {
    pub image_root: PathBuf,
    /// image_ref → caption; refs without an entry get the stub caption.
    pub captions: BTreeMap<String, String>,
}

impl MediaSource {
    pub fn new(image_root: impl Into<PathBuf>) -> Self {
        Self {
            image_root: image_root.into(),
            captions: BTreeMap::new(),
        }
    }

    /// Caption of the first post image; empty for text-only posts.
    pub fn caption_for(&self, instance: &Instance) -> String {
        instance
            .image_refs
            .first()
            .map(|r| self.captions.get(r).cloned().unwrap_or_else(|| stub_caption_for(r)))
            .unwrap_or_default()
    }
}

pub fn prompt_bundle(
    instance: &Instance,
    media: &MediaSource,
    template: &PromptTemplateConfig,
) -> Result<PromptBundle, WorkbenchError> {
    Ok(build_prompt_bundle(instance, &media.caption_for(instance), template)?)
}

/// Hash over `P^V` and every textual input, in the given order.
pub fn prompt_hash<'a>(p_v_text: &str, bundles: impl IntoIterator<Item = &'a PromptBundle>) -> String {
    let mut h = Sha256::new();
    h.update(p_v_text.as_bytes());
    for b in bundles {
        h.update(b"\x00");
        h.update(b.gamma_t.as_bytes());
    }
    hex::encode(h.finalize())
}

/// A labeled instance ready for the model.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: Instance,
    pub bundle: PromptBundle,
    pub example: TrainExample,
}

/// Encodes each distinct image set once; the encoder is frozen.
pub struct FeatureCache<'m> {
    model: &'m MultimodalModel,
    root: PathBuf,
    cache: BTreeMap<Vec<String>, Mat>,
}

impl<'m> FeatureCache<'m> {
    pub fn new(model: &'m MultimodalModel, root: &Path) -> Self {
        Self {
            model,
            root: root.to_path_buf(),
            cache: BTreeMap::new(),
        }
    }

    pub fn features(&mut self, image_refs: &[String]) -> Result<Mat, WorkbenchError> {
        let refs: Vec<String> = image_refs.iter().take(self.model.vision.max_images).cloned().collect();
        if let Some(f) = self.cache.get(&refs) {
            return Ok(f.clone());
        }
        let images = refs
            .iter()
            .map(|r| load_image(&self.root.join(r), self.model.vision.image_size))
            .collect::<Result<Vec<_>, _>>()?;
        let features = self.model.image_features(&images)?;
        self.cache.insert(refs, features.clone());
        Ok(features)
    }
}

/// Builds model inputs for instances carrying a gold label.
pub fn prepare(
    model: &MultimodalModel,
    instances: &[Instance],
    media: &MediaSource,
    template: &PromptTemplateConfig,
) -> Result<Vec<Prepared>, WorkbenchError> {
    let p_v = tokenize(&template.p_v_text).ids;
    let mut cache = FeatureCache::new(model, &media.image_root);
    instances
        .iter()
        .map(|inst| {
            let gold = inst
                .gold
                .ok_or_else(|| stancebench_core::eval::EvalError::MissingGold(inst.instance_id.clone()))?;
            let bundle = prompt_bundle(inst, media, template)?;
            let features = cache.features(&inst.image_refs)?;
            let example = TrainExample::new(p_v.clone(), features, bundle.gamma_t_tokens.ids.clone(), gold);
            Ok(Prepared {
                instance: inst.clone(),
                bundle,
                example,
            })
        })
        .collect()
}

/// Runs `config.steps` optimizer steps over seeded shuffles of `examples`.
pub fn train(
    model: &mut MultimodalModel,
    examples: &[TrainExample],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainState, WorkbenchError> {
    let mut state = TrainState::new(OptimizerConfig {
        lr: config.lr,
        ..Default::default()
    });
    if examples.is_empty() || config.steps == 0 {
        return Ok(state);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::new();
    let batch_size = config.batch.min(examples.len());
    for step in 0..config.steps {
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            if order.is_empty() {
                order = (0..examples.len()).collect();
                order.shuffle(&mut rng);
            }
            batch.push(examples[order.pop().expect("refilled")].clone());
        }
        let loss = train_step(model, &batch, &mut state)?;
        if (step + 1) % 50 == 0 {
            log::info!("step {} loss {loss:.4}", step + 1);
        }
    }
    Ok(state)
}

/// Greedy generation and label matching for each prepared instance.
pub fn predict(
    model: &MultimodalModel,
    prepared: &[Prepared],
    max_new_tokens: usize,
) -> Result<Vec<PredictionRecord>, WorkbenchError> {
    prepared
        .iter()
        .map(|p| {
            let input = p.example.input(model)?;
            let text = model.generate(&input, max_new_tokens, true)?;
            let matched = match_label(&text).matched;
            Ok(PredictionRecord {
                instance_id: p.instance.instance_id.clone(),
                generated_text: text,
                matched,
                gold: p.instance.gold,
            })
        })
        .collect()
}
