//! Seeded randomness.
//!
//! Every random decision in the workbench (splits, folds, undersampling,
//! weight initialisation, minibatch order, synthetic corpora) draws from a
//! ChaCha8 stream seeded with a 64-bit integer through
//! `SeedableRng::seed_from_u64`, so results reproduce across platforms.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type WorkbenchRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> WorkbenchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `0..n` in a seed-determined order.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    idx
}
