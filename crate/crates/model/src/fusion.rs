//! Multimodal input assembly and the adapter-equipped decoder.
//!
//! Sequence layout: `[INST] P^V <Img> Γ^V </Img> Γ^T [/INST]`. Forward
//! passes append the answer-start marker and any continuation tokens after
//! `[/INST]`.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stancebench_core::prompt::{detokenize, Marker, TokenSequence};

use crate::autograd::{Mat, Tape, Var};
use crate::block::{block_forward, init_block, BlockShape};
use crate::config::{ModelConfig, VisionConfig};
use crate::lora::LoraAdapter;
use crate::params::{normal, Binder, ParamStore};
use crate::vision::{self, Image};
use crate::ModelError;

pub const BYTE_EMBED: &str = "decoder.byte_embed";
pub const MARKER_EMBED: &str = "decoder.marker_embed";
pub const POS_EMBED: &str = "decoder.pos_embed";
pub const HEAD: &str = "decoder.head";

/// Id emitted to end an answer.
pub const STOP_ID: u32 = 257;

/// One sequence position: a vocabulary id or a row of `Γ^V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Token(u32),
    Visual(usize),
}

/// Spans of each segment; together with the four marker positions they
/// tile `0..len` in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    pub inst: usize,
    pub p_v: Range<usize>,
    pub img_open: usize,
    pub gamma_v: Range<usize>,
    pub img_close: usize,
    pub gamma_t: Range<usize>,
    pub inst_close: usize,
}

impl SegmentMap {
    pub fn len(&self) -> usize {
        self.inst_close + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    pub slots: Vec<Slot>,
    pub gamma_v: Mat,
    pub segments: SegmentMap,
}

impl FusionInput {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Recovers `(P^V ids, Γ^V, Γ^T ids)` from the segment map.
    pub fn reconstruct(&self) -> (Vec<u32>, Mat, Vec<u32>) {
        let ids = |r: &Range<usize>| {
            self.slots[r.clone()]
                .iter()
                .map(|s| match s {
                    Slot::Token(id) => *id,
                    Slot::Visual(_) => unreachable!("text span holds a visual slot"),
                })
                .collect::<Vec<_>>()
        };
        let rows: Vec<usize> = self.slots[self.segments.gamma_v.clone()]
            .iter()
            .map(|s| match s {
                Slot::Visual(i) => *i,
                Slot::Token(_) => unreachable!("visual span holds a token"),
            })
            .collect();
        let gamma_v = self.gamma_v.select(ndarray::Axis(0), &rows);
        (ids(&self.segments.p_v), gamma_v, ids(&self.segments.gamma_t))
    }
}

fn check_token(id: u32, vocab: usize) -> Result<(), ModelError> {
    if (id as usize) < vocab {
        Ok(())
    } else {
        Err(ModelError::DimensionError(format!("token id {id} outside vocabulary of {vocab}")))
    }
}

/// Lays out the sequence; `Γ^V` rows are referenced, not copied into the
/// token stream.
pub fn assemble_input(
    p_v: &[u32],
    gamma_v: &Mat,
    gamma_t: &[u32],
    config: &ModelConfig,
) -> Result<FusionInput, ModelError> {
    if gamma_v.ncols() != config.d_v && gamma_v.nrows() > 0 {
        return Err(ModelError::DimensionError(format!(
            "visual width {} vs d_v {}",
            gamma_v.ncols(),
            config.d_v
        )));
    }
    for &id in p_v.iter().chain(gamma_t) {
        check_token(id, config.vocabulary_size)?;
    }
    let m = gamma_v.nrows();
    let required = p_v.len() + m + gamma_t.len() + 4;
    if required > config.max_len {
        return Err(ModelError::SequenceTooLong {
            required,
            max: config.max_len,
        });
    }
    let mut slots = Vec::with_capacity(required);
    slots.push(Slot::Token(Marker::Inst.id()));
    slots.extend(p_v.iter().map(|&id| Slot::Token(id)));
    let img_open = slots.len();
    slots.push(Slot::Token(Marker::ImgOpen.id()));
    slots.extend((0..m).map(Slot::Visual));
    let img_close = slots.len();
    slots.push(Slot::Token(Marker::ImgClose.id()));
    slots.extend(gamma_t.iter().map(|&id| Slot::Token(id)));
    let inst_close = slots.len();
    slots.push(Slot::Token(Marker::InstClose.id()));
    let segments = SegmentMap {
        inst: 0,
        p_v: 1..img_open,
        img_open,
        gamma_v: img_open + 1..img_close,
        img_close,
        gamma_t: img_close + 1..inst_close,
        inst_close,
    };
    Ok(FusionInput {
        slots,
        gamma_v: if m == 0 { Mat::zeros((0, config.d_v)) } else { gamma_v.clone() },
        segments,
    })
}

/// Decoder, patch encoder and adapters under one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalModel {
    pub config: ModelConfig,
    pub vision: VisionConfig,
    pub params: ParamStore,
}

fn lora_name(layer: usize, target: &str, factor: &str) -> String {
    format!("decoder.block{layer}.lora_{target}.{factor}")
}

impl MultimodalModel {
    /// Initialises every tensor from `config.seed`.
    pub fn new(config: ModelConfig, vision: VisionConfig) -> Result<Self, ModelError> {
        config.validate()?;
        vision.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        vision::init_vision_params(&mut params, &vision, config.d_v, &mut rng);

        let d = config.d_v;
        let std_in = 1.0 / (d as f64).sqrt();
        let std_out = std_in / (2.0 * config.layers.max(1) as f64).sqrt();
        params.insert(BYTE_EMBED, normal(&mut rng, 256, d, 1.0), true);
        params.insert(MARKER_EMBED, normal(&mut rng, Marker::ALL.len(), d, 1.0), false);
        params.insert(POS_EMBED, normal(&mut rng, config.max_len, d, 0.5), true);
        for layer in 0..config.layers {
            init_block(
                &mut params,
                &mut rng,
                &format!("decoder.block{layer}"),
                d,
                config.ffn_mult * d,
                std_in,
                std_out,
            );
            for target in ["q", "v"] {
                let adapter = LoraAdapter::init(&mut rng, d, d, config.lora_rank, config.lora_scale());
                params.insert(lora_name(layer, target, "a"), adapter.a, false);
                params.insert(lora_name(layer, target, "b"), adapter.b, false);
            }
        }
        params.insert("decoder.final_ln_g", Mat::ones((1, d)), true);
        params.insert("decoder.final_ln_b", Mat::zeros((1, d)), true);
        params.insert(HEAD, normal(&mut rng, d, config.vocabulary_size, std_in), true);
        Ok(Self { config, vision, params })
    }

    /// The adapter on `target` (`"q"` or `"v"`) of decoder layer `layer`.
    pub fn adapter(&self, layer: usize, target: &str) -> Result<LoraAdapter, ModelError> {
        Ok(LoraAdapter {
            a: self.params.get(&lora_name(layer, target, "a"))?.clone(),
            b: self.params.get(&lora_name(layer, target, "b"))?.clone(),
            scale: self.config.lora_scale(),
        })
    }

    /// Hash over every frozen tensor (decoder base and patch encoder).
    pub fn frozen_hash(&self) -> String {
        self.params.frozen_hash()
    }

    /// Pre-projection features of up to `max_images` images, stacked.
    pub fn image_features(&self, images: &[Image]) -> Result<Mat, ModelError> {
        let mut rows = Vec::new();
        for image in images.iter().take(self.vision.max_images) {
            rows.push(vision::image_features(image, &self.params, &self.vision, self.config.precision)?);
        }
        let width = self.vision.width;
        if rows.is_empty() {
            return Ok(Mat::zeros((0, width)));
        }
        let views: Vec<_> = rows.iter().map(|m| m.view()).collect();
        ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| ModelError::DimensionError(e.to_string()))
    }

    /// `Γ^V` for the given pre-projection features.
    pub fn project(&self, features: &Mat) -> Result<Mat, ModelError> {
        vision::project(features, self.params.get(vision::PROJECTION)?)
    }

    /// Final hidden states for `input ++ [answer-start] ++ continuation`.
    ///
    /// `visual` supplies the rows referenced by [`Slot::Visual`].
    pub(crate) fn hidden_on_tape(
        &self,
        tape: &mut Tape,
        binder: &mut Binder<'_>,
        input: &FusionInput,
        visual: Var,
        continuation: &[u32],
        adapters: bool,
    ) -> Result<Var, ModelError> {
        let cfg = &self.config;
        let len = input.len() + 1 + continuation.len();
        if len > cfg.max_len {
            return Err(ModelError::SequenceTooLong {
                required: len,
                max: cfg.max_len,
            });
        }
        let bytes = binder.bind(tape, BYTE_EMBED)?;
        let markers = binder.bind(tape, MARKER_EMBED)?;
        let pos = binder.bind(tape, POS_EMBED)?;
        let token_row = |id: u32| -> Result<(Var, usize), ModelError> {
            check_token(id, cfg.vocabulary_size)?;
            Ok(if id < 256 { (bytes, id as usize) } else { (markers, id as usize - 256) })
        };
        let mut rows = Vec::with_capacity(len);
        for slot in &input.slots {
            rows.push(match *slot {
                Slot::Token(id) => token_row(id)?,
                Slot::Visual(i) => (visual, i),
            });
        }
        rows.push(token_row(Marker::AnswerStart.id())?);
        for &id in continuation {
            rows.push(token_row(id)?);
        }
        let embedded = tape.gather(rows);
        let positions = tape.gather((0..len).map(|i| (pos, i)).collect());
        let mut x = tape.add(embedded, positions);

        let shape = BlockShape {
            width: cfg.d_v,
            hidden: cfg.ffn_mult * cfg.d_v,
            heads: cfg.heads,
            causal: true,
        };
        let scale = adapters.then(|| cfg.lora_scale());
        for layer in 0..cfg.layers {
            x = block_forward(tape, binder, &format!("decoder.block{layer}"), x, &shape, scale)?;
        }
        let g = binder.bind(tape, "decoder.final_ln_g")?;
        let b = binder.bind(tape, "decoder.final_ln_b")?;
        Ok(tape.layer_norm(x, g, b))
    }

    /// Logits for the selected positions of the extended sequence.
    fn logits_at(
        &self,
        input: &FusionInput,
        continuation: &[u32],
        adapters: bool,
        rows: Option<Vec<usize>>,
    ) -> Result<Mat, ModelError> {
        let mut tape = Tape::new(self.config.precision);
        let mut binder = Binder::new(&self.params, false);
        let visual = tape.leaf(input.gamma_v.clone(), false);
        let hidden = self.hidden_on_tape(&mut tape, &mut binder, input, visual, continuation, adapters)?;
        let hidden = match rows {
            Some(rows) => tape.gather(rows.into_iter().map(|r| (hidden, r)).collect()),
            None => hidden,
        };
        let head = binder.bind(&mut tape, HEAD)?;
        let logits = tape.matmul(hidden, head);
        let logits = tape.value(logits).clone();
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NumericalError("decoder logits".into()));
        }
        Ok(logits)
    }

    /// Logits at every position of `input ++ [answer-start] ++ continuation`.
    pub fn forward(&self, input: &FusionInput, continuation: &[u32], adapters: bool) -> Result<Mat, ModelError> {
        self.logits_at(input, continuation, adapters, None)
    }

    /// Greedy decoding from the answer-start marker; stops at any marker id
    /// (the stop id included) or after `max_new_tokens` bytes.
    pub fn generate(&self, input: &FusionInput, max_new_tokens: usize, adapters: bool) -> Result<String, ModelError> {
        let mut out: Vec<u32> = Vec::new();
        while out.len() < max_new_tokens {
            let last = input.len() + out.len();
            let logits = self.logits_at(input, &out, adapters, Some(vec![last]))?;
            let next = argmax(logits.row(0).iter().copied());
            if next >= 256 {
                break;
            }
            out.push(next as u32);
        }
        let seq = TokenSequence {
            ids: out,
            ..TokenSequence::new()
        };
        Ok(detokenize(&seq).expect("byte ids always decode"))
    }
}

/// Index of the largest value; the lowest index wins ties.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
