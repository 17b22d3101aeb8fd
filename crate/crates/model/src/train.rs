//! Masked answer-token training of the adapters, projection and markers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use stancebench_core::StanceLabel;

use crate::autograd::{Mat, Tape};
use crate::fusion::{assemble_input, FusionInput, MultimodalModel, HEAD, STOP_ID};
use crate::params::Binder;
use crate::vision::PROJECTION;
use crate::ModelError;

/// Label word bytes followed by the stop id.
pub fn answer_tokens(label: StanceLabel) -> Vec<u32> {
    label.as_str().bytes().map(u32::from).chain([STOP_ID]).collect()
}

/// One supervised sequence. `features` are pre-projection image features,
/// so the projection stays on the differentiated path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub p_v: Vec<u32>,
    pub features: Mat,
    pub gamma_t: Vec<u32>,
    pub answer: Vec<u32>,
}

impl TrainExample {
    pub fn new(p_v: Vec<u32>, features: Mat, gamma_t: Vec<u32>, label: StanceLabel) -> Self {
        Self {
            p_v,
            features,
            gamma_t,
            answer: answer_tokens(label),
        }
    }

    /// The assembled input under the model's current projection.
    pub fn input(&self, model: &MultimodalModel) -> Result<FusionInput, ModelError> {
        let gamma_v = model.project(&self.features)?;
        assemble_input(&self.p_v, &gamma_v, &self.gamma_t, &model.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: running second moments per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub step: usize,
    pub optimizer: OptimizerConfig,
    pub moments: BTreeMap<String, Mat>,
    pub loss_history: Vec<f64>,
}

impl TrainState {
    pub fn new(optimizer: OptimizerConfig) -> Self {
        Self {
            step: 0,
            optimizer,
            moments: BTreeMap::new(),
            loss_history: Vec::new(),
        }
    }
}

/// Mean over the batch of each example's mean answer-token cross-entropy,
/// with gradients for every trainable tensor when `with_grads` is set.
pub fn batch_loss(
    model: &MultimodalModel,
    batch: &[TrainExample],
    with_grads: bool,
) -> Result<(f64, BTreeMap<String, Mat>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::NoTargetTokens);
    }
    let mut tape = Tape::new(model.config.precision);
    let mut binder = Binder::new(&model.params, with_grads);
    let head = binder.bind(&mut tape, HEAD)?;
    let w_proj = binder.bind(&mut tape, PROJECTION)?;
    let mut total = None;
    for example in batch {
        if example.answer.is_empty() {
            return Err(ModelError::NoTargetTokens);
        }
        let input = example.input(model)?;
        let features = tape.leaf(example.features.clone(), false);
        let visual = tape.matmul(features, w_proj);
        let (prefix, _) = example.answer.split_at(example.answer.len() - 1);
        let hidden = model.hidden_on_tape(&mut tape, &mut binder, &input, visual, prefix, true)?;
        let start = input.len();
        let rows = (0..example.answer.len()).map(|i| (hidden, start + i)).collect();
        let hidden = tape.gather(rows);
        let logits = tape.matmul(hidden, head);
        let targets = example.answer.iter().enumerate().map(|(i, &t)| (i, t as usize)).collect();
        let loss = tape.cross_entropy(logits, targets);
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss),
        });
    }
    let total = total.expect("non-empty batch");
    let loss = tape.scale(total, 1.0 / batch.len() as f64);
    let value = tape.value(loss)[[0, 0]];
    if !value.is_finite() {
        return Err(ModelError::NumericalError("training loss".into()));
    }
    let mut grads = BTreeMap::new();
    if with_grads {
        let g = tape.backward(loss);
        for (name, var) in binder.bound() {
            if model.params.is_frozen(name) {
                continue;
            }
            if let Some(grad) = g.get(*var) {
                grads.insert(name.clone(), grad.clone());
            }
        }
    }
    Ok((value, grads))
}

/// One adaptive step: `p -= lr·g / (sqrt(v̂) + eps)` with bias-corrected
/// second moments `v`. Frozen tensors are never written.
pub fn train_step(model: &mut MultimodalModel, batch: &[TrainExample], state: &mut TrainState) -> Result<f64, ModelError> {
    let (loss, grads) = batch_loss(model, batch, true)?;
    state.step += 1;
    let OptimizerConfig { lr, beta, eps } = state.optimizer;
    let correction = 1.0 - beta.powi(state.step as i32);
    for (name, grad) in grads {
        let v = state
            .moments
            .entry(name.clone())
            .or_insert_with(|| Mat::zeros(grad.dim()));
        v.zip_mut_with(&grad, |v, g| *v = beta * *v + (1.0 - beta) * g * g);
        let param = model.params.get_mut(&name)?;
        ndarray::Zip::from(param)
            .and(&*v)
            .and(&grad)
            .for_each(|p, &v, &g| *p -= lr * g / ((v / correction).sqrt() + eps));
    }
    state.loss_history.push(loss);
    Ok(loss)
}
