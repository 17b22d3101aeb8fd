//! In-target and cross-target evaluation runs.

use serde::{Deserialize, Serialize};
use stancebench_core::corpus::{Instance, Split};
use stancebench_core::eval::{
    depth_bucket_report, evaluate, DepthBucketReport, EvalReport, PredictionRecord, TargetKind,
};
use stancebench_core::prompt::AblationFlags;
use stancebench_model::MultimodalModel;

use crate::config::{CrossScope, RunConfig};
use crate::manifest::corpus_hash;
use crate::pipeline::{predict, prepare, prompt_hash, train, MediaSource};
use crate::WorkbenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    InTarget,
    CrossTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub mode: Mode,
    /// Training target of a cross-target run.
    pub source: Option<String>,
    pub dest: String,
}

/// Provenance embedded in every report; it carries no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub mode: Mode,
    pub source: String,
    pub dest: String,
    pub seed: u64,
    pub config_hash: String,
    pub corpus_hash: String,
    pub prompt_hash: String,
    pub ablation: AblationFlags,
    pub train_instances: usize,
    pub test_instances: usize,
    pub steps: usize,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub manifest: ReportManifest,
    pub scores: EvalReport,
    pub depth: DepthBucketReport,
}

pub struct ProtocolRun {
    pub report: ProtocolReport,
    pub predictions: Vec<PredictionRecord>,
    pub model: MultimodalModel,
}

/// The corpus target group named by `name` (case-insensitive).
pub fn resolve_target(instances: &[Instance], name: &str) -> Result<String, WorkbenchError> {
    instances
        .iter()
        .map(|i| i.target_group.as_str())
        .find(|g| g.eq_ignore_ascii_case(name))
        .map(str::to_string)
        .ok_or_else(|| WorkbenchError::EmptySelection {
            target: name.to_string(),
            scope: "the corpus".into(),
        })
}

/// Labeled instances of `target`; `splits = None` keeps every instance.
fn select(instances: &[Instance], target: &str, splits: Option<&[Split]>) -> Vec<Instance> {
    instances
        .iter()
        .filter(|i| i.target_group == target && i.gold.is_some())
        .filter(|i| splits.is_none_or(|splits| i.split.is_some_and(|s| splits.contains(&s))))
        .cloned()
        .collect()
}

fn non_empty(v: Vec<Instance>, target: &str, scope: &str) -> Result<Vec<Instance>, WorkbenchError> {
    if v.is_empty() {
        Err(WorkbenchError::EmptySelection {
            target: target.to_string(),
            scope: scope.to_string(),
        })
    } else {
        Ok(v)
    }
}

/// Trains a fresh model from `config.model.seed` and scores it.
///
/// In-target: train on the destination's train split, test on its test
/// split. Cross-target: train on the source's train and val splits, test on
/// the destination (all labeled instances, or its test split per config).
pub fn run_protocol(
    instances: &[Instance],
    media: &MediaSource,
    config: &RunConfig,
    spec: &ProtocolSpec,
) -> Result<ProtocolRun, WorkbenchError> {
    config.validate()?;
    let dest = resolve_target(instances, &spec.dest)?;
    let (source, train_set, test_set) = match spec.mode {
        Mode::InTarget => (
            dest.clone(),
            non_empty(select(instances, &dest, Some(&[Split::Train])), &dest, "the train split")?,
            non_empty(select(instances, &dest, Some(&[Split::Test])), &dest, "the test split")?,
        ),
        Mode::CrossTarget => {
            let name = spec
                .source
                .as_deref()
                .ok_or_else(|| WorkbenchError::Protocol("cross-target runs need a source target".into()))?;
            let source = resolve_target(instances, name)?;
            if source == dest {
                return Err(WorkbenchError::Protocol(format!(
                    "cross-target source and destination are both `{dest}`"
                )));
            }
            let test_splits: Option<&[Split]> = match config.eval.cross_scope {
                CrossScope::Full => None,
                CrossScope::Test => Some(&[Split::Test]),
            };
            (
                source.clone(),
                non_empty(select(instances, &source, Some(&[Split::Train, Split::Val])), &source, "train+val")?,
                non_empty(select(instances, &dest, test_splits), &dest, "the evaluation set")?,
            )
        }
    };

    let mut model = MultimodalModel::new(config.model.clone(), config.vision.clone())?;
    let train_prepared = prepare(&model, &train_set, media, &config.prompt)?;
    let test_prepared = prepare(&model, &test_set, media, &config.prompt)?;
    let examples: Vec<_> = train_prepared.iter().map(|p| p.example.clone()).collect();
    let state = train(&mut model, &examples, &config.train, config.model.seed)?;

    let predictions = predict(&model, &test_prepared, config.eval.max_new_tokens)?;
    let scores = evaluate(&predictions, &test_set)?.rounded();
    let kind = if test_set.iter().all(Instance::is_post_target) {
        TargetKind::PostT
    } else {
        TargetKind::Named
    };
    let depth = depth_bucket_report(&predictions, &test_set, kind)?.rounded();

    let manifest = ReportManifest {
        mode: spec.mode,
        source,
        dest,
        seed: config.model.seed,
        config_hash: config.hash(),
        corpus_hash: corpus_hash(instances),
        prompt_hash: prompt_hash(
            &config.prompt.p_v_text,
            train_prepared.iter().chain(&test_prepared).map(|p| &p.bundle),
        ),
        ablation: config.prompt.ablation,
        train_instances: train_set.len(),
        test_instances: test_set.len(),
        steps: state.step,
        final_loss: state.loss_history.last().copied(),
    };
    Ok(ProtocolRun {
        report: ProtocolReport {
            manifest,
            scores,
            depth,
        },
        predictions,
        model,
    })
}
