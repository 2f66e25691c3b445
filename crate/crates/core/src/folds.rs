//! Stratified k-fold partitioning shared by feature ranking and model
//! evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::ChannelClass;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FoldError {
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    ClassTooSmall {
        class: ChannelClass,
        count: usize,
        folds: usize,
    },
}

/// Partition `0..labels.len()` into `k` test folds so that each fold holds
/// the floor or ceiling of its share of every class.
///
/// Each class is shuffled with a seeded ChaCha stream and dealt round-robin;
/// the dealing position carries over between classes so fold sizes stay
/// within one of each other.
pub fn stratified_folds(
    labels: &[ChannelClass],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, FoldError> {
    if k < 2 {
        return Err(FoldError::TooFewFolds(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for class in ChannelClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(FoldError::ClassTooSmall {
                class,
                count: idx.len(),
                folds: k,
            });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Indices not in `fold`, in ascending order.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}
