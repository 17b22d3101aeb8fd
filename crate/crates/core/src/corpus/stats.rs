use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Instance};
use crate::label::StanceLabel;

/// Label and vision-relevance distribution for one target group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub total: usize,
    /// Indexed by [`StanceLabel::index`].
    pub label_counts: [usize; 3],
    /// Percentages, unrounded.
    pub label_percent: [f64; 3],
    pub vision_count: usize,
    pub vision_percent: f64,
}

impl TargetStats {
    fn finish(&mut self) {
        let total = self.total as f64;
        for (pct, &count) in self.label_percent.iter_mut().zip(&self.label_counts) {
            *pct = 100.0 * count as f64 / total;
        }
        self.vision_percent = 100.0 * self.vision_count as f64 / total;
    }

    pub fn count(&self, label: StanceLabel) -> usize {
        self.label_counts[label.index()]
    }

    pub fn percent(&self, label: StanceLabel) -> f64 {
        self.label_percent[label.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub count: usize,
    pub percent: f64,
    /// Mean word count of the focus utterance.
    pub mean_words: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_target: BTreeMap<String, TargetStats>,
    pub overall: TargetStats,
    pub per_depth: BTreeMap<usize, DepthStats>,
}

/// An externally reported vision-related percentage that does not match count/total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionDiscrepancy {
    pub target: String,
    pub count: usize,
    pub total: usize,
    pub computed_percent: f64,
    pub reported_percent: f64,
}

impl CorpusStats {
    /// Compares externally reported vision percentages with count/total.
    ///
    /// Targets absent from the corpus are skipped.
    pub fn vision_discrepancies(
        &self,
        reported: &BTreeMap<String, f64>,
        tolerance: f64,
    ) -> Vec<VisionDiscrepancy> {
        reported
            .iter()
            .filter_map(|(target, &reported_percent)| {
                let s = self.per_target.get(target)?;
                ((s.vision_percent - reported_percent).abs() > tolerance).then(|| VisionDiscrepancy {
                    target: target.clone(),
                    count: s.vision_count,
                    total: s.total,
                    computed_percent: s.vision_percent,
                    reported_percent,
                })
            })
            .collect()
    }
}

pub fn compute_corpus_stats(instances: &[Instance]) -> Result<CorpusStats, CorpusError> {
    if instances.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut per_target: BTreeMap<String, TargetStats> = BTreeMap::new();
    let mut overall = TargetStats::default();
    let mut depth_words: BTreeMap<usize, (usize, usize)> = BTreeMap::new();

    for inst in instances {
        let gold = inst.gold.ok_or_else(|| CorpusError::MissingGold {
            instance_id: inst.instance_id.clone(),
        })?;
        let vision = inst.vision_related.unwrap_or(false);
        for s in [per_target.entry(inst.target_group.clone()).or_default(), &mut overall] {
            s.total += 1;
            s.label_counts[gold.index()] += 1;
            s.vision_count += usize::from(vision);
        }
        let e = depth_words.entry(inst.depth).or_default();
        e.0 += 1;
        e.1 += inst.focus().word_count();
    }
    per_target.values_mut().for_each(TargetStats::finish);
    overall.finish();

    let total = instances.len();
    let per_depth = depth_words
        .into_iter()
        .map(|(depth, (count, words))| {
            (
                depth,
                DepthStats {
                    count,
                    percent: 100.0 * count as f64 / total as f64,
                    mean_words: words as f64 / count as f64,
                },
            )
        })
        .collect();
    Ok(CorpusStats {
        total,
        per_target,
        overall,
        per_depth,
    })
}
