use serde::{Deserialize, Serialize};

use super::metrics::{align, ConfusionCounts, PredictionRecord, Scores};
use super::EvalError;
use crate::corpus::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    Named,
    PostT,
}

impl TargetKind {
    /// Inclusive depth ranges of the three buckets.
    pub fn buckets(self) -> [(usize, usize); 3] {
        match self {
            TargetKind::Named => [(1, 1), (2, 4), (5, 6)],
            TargetKind::PostT => [(2, 2), (3, 4), (5, 6)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBucket {
    pub min_depth: usize,
    pub max_depth: usize,
    pub scores: Scores,
}

impl DepthBucket {
    pub fn label(&self) -> String {
        if self.min_depth == self.max_depth {
            self.min_depth.to_string()
        } else {
            format!("{}-{}", self.min_depth, self.max_depth)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBucketReport {
    pub target_kind: TargetKind,
    pub buckets: Vec<DepthBucket>,
}

impl DepthBucketReport {
    pub fn rounded(&self) -> Self {
        DepthBucketReport {
            target_kind: self.target_kind,
            buckets: self
                .buckets
                .iter()
                .map(|b| DepthBucket {
                    scores: b.scores.rounded(),
                    ..b.clone()
                })
                .collect(),
        }
    }
}

pub fn depth_bucket_report(
    predictions: &[PredictionRecord],
    gold: &[Instance],
    target_kind: TargetKind,
) -> Result<DepthBucketReport, EvalError> {
    let ranges = target_kind.buckets();
    let mut confusion = [ConfusionCounts::default(); 3];
    for a in align(predictions, gold)? {
        let depth = a.instance.depth;
        let bucket = ranges
            .iter()
            .position(|&(lo, hi)| (lo..=hi).contains(&depth))
            .ok_or_else(|| EvalError::DepthOutOfRange {
                instance_id: a.instance.instance_id.clone(),
                depth,
            })?;
        confusion[bucket].add(a.predicted, a.gold);
    }
    Ok(DepthBucketReport {
        target_kind,
        buckets: ranges
            .iter()
            .zip(confusion)
            .map(|(&(min_depth, max_depth), c)| DepthBucket {
                min_depth,
                max_depth,
                scores: Scores::from_confusion(c),
            })
            .collect(),
    })
}
