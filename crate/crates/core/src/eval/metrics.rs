use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::Instance;
use crate::label::StanceLabel;
use crate::util::round2;

/// Per-class TP/FP/FN, indexed by [`StanceLabel::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: [usize; 3],
    pub fp: [usize; 3],
    #[serde(rename = "fn")]
    pub fn_: [usize; 3],
}

impl ConfusionCounts {
    pub fn add(&mut self, predicted: StanceLabel, gold: StanceLabel) {
        if predicted == gold {
            self.tp[gold.index()] += 1;
        } else {
            self.fp[predicted.index()] += 1;
            self.fn_[gold.index()] += 1;
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (StanceLabel, StanceLabel)>) -> Self {
        let mut c = Self::default();
        for (p, g) in pairs {
            c.add(p, g);
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp.iter().sum::<usize>() + self.fp.iter().sum::<usize>()
    }
}

/// F1 of one class in percent; zero when the class never occurs on either side.
pub fn f1_class(conf: &ConfusionCounts, class: StanceLabel) -> f64 {
    let i = class.index();
    let denom = 2 * conf.tp[i] + conf.fp[i] + conf.fn_[i];
    if denom == 0 {
        0.0
    } else {
        100.0 * (2 * conf.tp[i]) as f64 / denom as f64
    }
}

/// Mean of the against and favor F1 scores.
pub fn f1_avg(f1_against: f64, f1_favor: f64) -> f64 {
    (f1_against + f1_favor) / 2.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1_against: f64,
    pub f1_favor: f64,
    pub f1_none: f64,
    pub f1_avg: f64,
    pub n: usize,
    pub confusion: ConfusionCounts,
}

impl Scores {
    pub fn from_confusion(confusion: ConfusionCounts) -> Self {
        let f1_against = f1_class(&confusion, StanceLabel::Against);
        let f1_favor = f1_class(&confusion, StanceLabel::Favor);
        Scores {
            f1_against,
            f1_favor,
            f1_none: f1_class(&confusion, StanceLabel::None),
            f1_avg: f1_avg(f1_against, f1_favor),
            n: confusion.total(),
            confusion,
        }
    }

    pub fn rounded(&self) -> Self {
        Scores {
            f1_against: round2(self.f1_against),
            f1_favor: round2(self.f1_favor),
            f1_none: round2(self.f1_none),
            f1_avg: round2(self.f1_avg),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub overall: Scores,
    pub per_target: BTreeMap<String, Scores>,
}

impl EvalReport {
    /// Copy with every percentage rounded half-up to two decimals.
    pub fn rounded(&self) -> Self {
        EvalReport {
            overall: self.overall.rounded(),
            per_target: self.per_target.iter().map(|(k, v)| (k.clone(), v.rounded())).collect(),
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub generated_text: String,
    pub matched: StanceLabel,
    pub gold: Option<StanceLabel>,
}

pub(crate) struct Aligned<'a> {
    pub instance: &'a Instance,
    pub gold: StanceLabel,
    pub predicted: StanceLabel,
}

/// Pairs each gold instance with exactly one prediction; anything else is an error.
pub(crate) fn align<'a>(predictions: &[PredictionRecord], gold: &'a [Instance]) -> Result<Vec<Aligned<'a>>, EvalError> {
    let mut by_id: BTreeMap<&str, StanceLabel> = BTreeMap::new();
    let mut duplicated = BTreeSet::new();
    for p in predictions {
        if by_id.insert(p.instance_id.as_str(), p.matched).is_some() {
            duplicated.insert(p.instance_id.clone());
        }
    }
    let gold_ids: BTreeSet<&str> = gold.iter().map(|g| g.instance_id.as_str()).collect();
    let missing: Vec<String> = gold_ids
        .iter()
        .filter(|id| !by_id.contains_key(*id))
        .map(|s| s.to_string())
        .collect();
    let extra: Vec<String> = by_id
        .keys()
        .filter(|id| !gold_ids.contains(*id))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() || !extra.is_empty() || !duplicated.is_empty() {
        return Err(EvalError::PredictionGoldMismatch {
            missing,
            extra,
            duplicated: duplicated.into_iter().collect(),
        });
    }
    gold.iter()
        .map(|inst| {
            Ok(Aligned {
                instance: inst,
                gold: inst.gold.ok_or_else(|| EvalError::MissingGold(inst.instance_id.clone()))?,
                predicted: by_id[inst.instance_id.as_str()],
            })
        })
        .collect()
}

pub fn evaluate(predictions: &[PredictionRecord], gold: &[Instance]) -> Result<EvalReport, EvalError> {
    let aligned = align(predictions, gold)?;
    let overall = ConfusionCounts::from_pairs(aligned.iter().map(|a| (a.predicted, a.gold)));
    let mut per_target: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for a in &aligned {
        per_target
            .entry(a.instance.target_group.clone())
            .or_default()
            .add(a.predicted, a.gold);
    }
    Ok(EvalReport {
        overall: Scores::from_confusion(overall),
        per_target: per_target
            .into_iter()
            .map(|(k, c)| (k, Scores::from_confusion(c)))
            .collect(),
    })
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    let err = |message: String| EvalError::PredictionsFile {
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_predictions(path: &Path, predictions: &[PredictionRecord]) -> Result<(), EvalError> {
    let err = |e: std::io::Error| EvalError::PredictionsFile {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut f = fs::File::create(path).map_err(err)?;
    for p in predictions {
        writeln!(f, "{}", serde_json::to_string(p).expect("prediction serializes")).map_err(err)?;
    }
    Ok(())
}
