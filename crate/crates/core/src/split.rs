//! Class-stratified train/test splitting.

use crate::frame::{Frame, Label, Provenance};
use crate::seed::rng_from_seed;
use rand::seq::SliceRandom;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("train fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("cannot split an empty frame")]
    EmptyFrame,
}

/// Result of [`split_train_test`]. `stratified` is false when a class had
/// fewer than two members and the split degraded to a simple random one.
#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: Frame,
    pub test: Frame,
    pub stratified: bool,
}

/// Split `chunk` into train/test with `|train| = round(train_fraction * n)`.
///
/// The split is class-stratified: the train set takes
/// `round(train_fraction * n_min)` minority instances and the remainder from
/// the majority, so early low-minority windows keep fraud cases on both
/// sides. Instances keep their original order within each output. A class
/// with fewer than two members degrades the split to simple random sampling.
pub fn split_train_test(
    chunk: &Frame,
    train_fraction: f64,
    seed: u64,
) -> Result<TrainTestSplit, SplitError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SplitError::BadFraction(train_fraction));
    }
    if chunk.is_empty() {
        return Err(SplitError::EmptyFrame);
    }

    let n = chunk.len();
    let train_target = (train_fraction * n as f64).round() as usize;
    let train_target = train_target.min(n);

    let minority = chunk.indices_of(Label::Fraud);
    let majority = chunk.indices_of(Label::Legit);
    let stratified = minority.len() >= 2 && majority.len() >= 2;

    let mut rng = rng_from_seed(seed);
    let mut train_idx: Vec<usize>;
    if stratified {
        let mut min_pool = minority;
        let mut maj_pool = majority;
        min_pool.shuffle(&mut rng);
        maj_pool.shuffle(&mut rng);

        // Minority target rounds independently; the majority absorbs the
        // remainder so the overall size stays exact.
        let min_take = ((train_fraction * min_pool.len() as f64).round() as usize)
            .min(min_pool.len())
            .min(train_target);
        let maj_take = (train_target - min_take).min(maj_pool.len());

        train_idx = Vec::with_capacity(train_target);
        train_idx.extend_from_slice(&min_pool[..min_take]);
        train_idx.extend_from_slice(&maj_pool[..maj_take]);
    } else {
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng);
        train_idx = pool[..train_target].to_vec();
    }

    train_idx.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();

    Ok(TrainTestSplit {
        train: chunk.select(&train_idx, Provenance::Raw),
        test: chunk.select(&test_idx, Provenance::Raw),
        stratified,
    })
}
