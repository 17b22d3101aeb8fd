use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{align, f1_avg, f1_class, ConfusionCounts, PredictionRecord};
use super::EvalError;
use crate::corpus::Instance;
use crate::label::StanceLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// F1-avg(A) − F1-avg(B) on the full set, in percentage points.
    pub observed_delta: f64,
    /// Share of resamples where A does not beat B.
    pub p_value: f64,
    pub resamples: usize,
    pub seed: u64,
}

fn score(pairs: impl Iterator<Item = (StanceLabel, StanceLabel)>) -> f64 {
    let c = ConfusionCounts::from_pairs(pairs);
    f1_avg(f1_class(&c, StanceLabel::Against), f1_class(&c, StanceLabel::Favor))
}

/// Paired bootstrap for the hypothesis "system A has higher F1-avg than B".
///
/// Instances are sorted by id before resampling, so the result depends only
/// on the prediction contents and the seed.
pub fn paired_bootstrap(
    preds_a: &[PredictionRecord],
    preds_b: &[PredictionRecord],
    gold: &[Instance],
    resamples: usize,
    seed: u64,
) -> Result<SignificanceResult, EvalError> {
    if resamples < 100 {
        return Err(EvalError::TooFewResamples(resamples));
    }
    let mut a = align(preds_a, gold)?;
    let mut b = align(preds_b, gold)?;
    a.sort_by(|x, y| x.instance.instance_id.cmp(&y.instance.instance_id));
    b.sort_by(|x, y| x.instance.instance_id.cmp(&y.instance.instance_id));
    let rows: Vec<(StanceLabel, StanceLabel, StanceLabel)> =
        a.iter().zip(&b).map(|(x, y)| (x.gold, x.predicted, y.predicted)).collect();
    let n = rows.len();

    let observed_delta = score(rows.iter().map(|r| (r.1, r.0))) - score(rows.iter().map(|r| (r.2, r.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0usize;
    let mut idx = vec![0usize; n];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..n.max(1));
        }
        let sa = score(idx.iter().map(|&i| (rows[i].1, rows[i].0)));
        let sb = score(idx.iter().map(|&i| (rows[i].2, rows[i].0)));
        if sa <= sb {
            not_better += 1;
        }
    }
    Ok(SignificanceResult {
        observed_delta,
        p_value: not_better as f64 / resamples as f64,
        resamples,
        seed,
    })
}
