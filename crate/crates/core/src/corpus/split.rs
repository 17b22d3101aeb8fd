use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Instance, Split};
use crate::util::fnv1a64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let r = self.as_array();
        if r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(r));
        }
        Ok(())
    }
}

/// Split of every instance, keyed by instance id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub by_instance: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn apply(&self, instances: &mut [Instance]) {
        for inst in instances {
            inst.split = self.by_instance.get(&inst.instance_id).copied();
        }
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in self.by_instance.values() {
            c[s.index()] += 1;
        }
        c
    }
}

/// Assigns whole threads to train/val/test, balancing instance counts per target.
///
/// Threads are visited in a seeded random order; each goes to the split that
/// is furthest below its instance quota. Every split first receives one
/// thread so no split is left empty.
pub fn split_corpus(
    instances: &[Instance],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment, CorpusError> {
    ratios.validate()?;
    let ratio = ratios.as_array();

    // target -> thread -> instance ids (BTreeMaps keep iteration order stable)
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<&str>>> = BTreeMap::new();
    for inst in instances {
        groups
            .entry(inst.target_group.as_str())
            .or_default()
            .entry(inst.thread_id.as_str())
            .or_default()
            .push(inst.instance_id.as_str());
    }

    let mut by_instance = BTreeMap::new();
    for (target, threads) in groups {
        if threads.len() < 3 {
            return Err(CorpusError::InsufficientThreads {
                target: target.to_string(),
                threads: threads.len(),
            });
        }
        let total: usize = threads.values().map(Vec::len).sum();
        let quota: Vec<f64> = ratio.iter().map(|r| r * total as f64).collect();

        let mut order: Vec<(&str, &Vec<&str>)> = threads.iter().map(|(k, v)| (*k, v)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(target.as_bytes()));
        order.shuffle(&mut rng);

        let mut filled = [0usize; 3];
        let mut assign = |split: usize, ids: &Vec<&str>, filled: &mut [usize; 3]| {
            filled[split] += ids.len();
            for id in ids {
                by_instance.insert(id.to_string(), Split::ALL[split]);
            }
        };

        // seed each split with the smallest remaining thread
        let mut rest = order;
        let mut seeded = Vec::new();
        for split in [1, 2, 0] {
            if ratio[split] == 0.0 {
                continue;
            }
            let (pos, _) = rest
                .iter()
                .enumerate()
                .min_by_key(|(_, (_, ids))| ids.len())
                .expect("at least three threads");
            seeded.push((split, rest.remove(pos)));
        }
        for (split, (_, ids)) in seeded {
            assign(split, ids, &mut filled);
        }
        for (_, ids) in rest {
            let split = (0..3)
                .filter(|&s| ratio[s] > 0.0)
                .max_by(|&a, &b| {
                    let da = (quota[a] - filled[a] as f64) / quota[a];
                    let db = (quota[b] - filled[b] as f64) / quota[b];
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("some ratio is positive");
            assign(split, ids, &mut filled);
        }
    }
    Ok(SplitAssignment { seed, by_instance })
}
