use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Indices of the training and test subjects of one fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn folds_from_assignment(n: usize, k: usize, fold_of: impl Fn(usize) -> usize) -> Vec<Fold> {
    (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of(i) == f);
            Fold { train, test }
        })
        .collect()
}

/// Seeded partition of `n` subjects into `k` near-equal test sets.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "cannot split {n} subjects into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(folds_from_assignment(n, k, |i| fold_of[i]))
}

/// Contiguous split over pre-assigned groups: the sorted distinct groups are
/// cut into `k` consecutive runs and every subject follows its group.
pub fn group_kfold_split(groups: &[usize], k: usize) -> Result<Vec<Fold>> {
    let mut distinct = groups.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    if k > distinct.len() {
        return Err(Error::invalid(format!(
            "cannot split {} groups into {k} folds",
            distinct.len()
        )));
    }
    let g = distinct.len();
    let fold_of_group = |gi: usize| gi * k / g;
    Ok(folds_from_assignment(groups.len(), k, |i| {
        let gi = distinct.binary_search(&groups[i]).expect("group is listed");
        fold_of_group(gi)
    }))
}
