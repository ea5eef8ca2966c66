//! Reference-disjoint train/test splits.
//!
//! Identifiers are de-duplicated and sorted before shuffling, so plans depend
//! only on the set of references and the seed. All repetitions draw from one
//! Xoshiro256++ stream seeded from the 64-bit seed.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::EvalError;

/// Upper bound on the training share accepted by [`ratio_splits`], in percent.
pub const MAX_TRAIN_PERCENT: f64 = 95.0;

/// One repetition of k-fold cross-validation over reference ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    pub repetition: usize,
    folds: Vec<Vec<String>>,
}

impl SplitPlan {
    pub fn folds(&self) -> &[Vec<String>] {
        &self.folds
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }

    /// `(train, test)` reference sets when fold `k` is held out.
    pub fn train_test(&self, k: usize) -> (BTreeSet<&str>, BTreeSet<&str>) {
        let mut train = BTreeSet::new();
        let mut test = BTreeSet::new();
        for (i, fold) in self.folds.iter().enumerate() {
            let target = if i == k { &mut test } else { &mut train };
            target.extend(fold.iter().map(String::as_str));
        }
        (train, test)
    }
}

fn unique_sorted(ids: &[String]) -> Vec<String> {
    ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Shuffle the references into `folds` near-equal folds, once per repetition.
/// The first `n % folds` folds receive one extra reference.
pub fn make_splits(
    reference_ids: &[String],
    folds: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<SplitPlan>, EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let mut ids = unique_sorted(reference_ids);
    if ids.len() < folds {
        return Err(EvalError::TooFewReferences { needed: folds, got: ids.len() });
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let (base, extra) = (ids.len() / folds, ids.len() % folds);
    let mut plans = Vec::with_capacity(repetitions);
    for repetition in 0..repetitions {
        ids.shuffle(&mut rng);
        let mut rest = ids.as_slice();
        let mut assignment = Vec::with_capacity(folds);
        for k in 0..folds {
            let size = base + usize::from(k < extra);
            let (head, tail) = rest.split_at(size);
            assignment.push(head.to_vec());
            rest = tail;
        }
        plans.push(SplitPlan { seed, repetition, folds: assignment });
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainTestSplit {
    pub repetition: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Random reference-disjoint splits with `round(n · percent / 100)` training
/// references (at least one on each side).
pub fn ratio_splits(
    reference_ids: &[String],
    train_percent: f64,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<TrainTestSplit>, EvalError> {
    if !(train_percent > 0.0 && train_percent <= MAX_TRAIN_PERCENT) {
        return Err(EvalError::InvalidParameter(format!(
            "train ratio must be in (0, {MAX_TRAIN_PERCENT}] percent, got {train_percent}"
        )));
    }
    let mut ids = unique_sorted(reference_ids);
    if ids.len() < 2 {
        return Err(EvalError::TooFewReferences { needed: 2, got: ids.len() });
    }
    let n_train = ((ids.len() as f64 * train_percent / 100.0).round() as usize).clamp(1, ids.len() - 1);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Ok((0..repetitions)
        .map(|repetition| {
            ids.shuffle(&mut rng);
            let (train, test) = ids.split_at(n_train);
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort();
            test.sort();
            TrainTestSplit { repetition, train, test }
        })
        .collect())
}
