use std::collections::BTreeMap;

use super::AnnotationError;
use crate::label::StanceLabel;

/// Keeps only pairs where both raters chose favor or against.
pub fn polar_pairs(pairs: &[(StanceLabel, StanceLabel)]) -> Vec<(StanceLabel, StanceLabel)> {
    pairs
        .iter()
        .copied()
        .filter(|(a, b)| a.is_polar() && b.is_polar())
        .collect()
}

/// Cohen's kappa with per-rater marginals, computed over favor/against pairs.
///
/// Pairs involving `None` are dropped before computing anything.
pub fn cohen_kappa(pairs: &[(StanceLabel, StanceLabel)]) -> Result<f64, AnnotationError> {
    let pairs = polar_pairs(pairs);
    if pairs.is_empty() {
        return Err(AnnotationError::NoEligiblePairs);
    }
    let n = pairs.len() as f64;
    let mut rater_a: BTreeMap<StanceLabel, usize> = BTreeMap::new();
    let mut rater_b: BTreeMap<StanceLabel, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for &(a, b) in &pairs {
        *rater_a.entry(a).or_default() += 1;
        *rater_b.entry(b).or_default() += 1;
        agree += usize::from(a == b);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = rater_a
        .iter()
        .map(|(label, &ca)| {
            let cb = rater_b.get(label).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(AnnotationError::DegenerateMarginals);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
