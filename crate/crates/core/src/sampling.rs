//! Seeded random streams.
//!
//! Each worker owns an independent ChaCha8 stream selected by
//! `(run seed, stream id)`; ChaCha is counter-based so streams never
//! overlap and a worker's sequence does not depend on scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids at or above this value are reserved for non-index draws
/// (simulator delays and masks, trial seeds).
pub const AUX_STREAM_BASE: u64 = 1 << 62;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for Monte-Carlo trial `trial`; trial 0 reuses the base seed so a
/// single-trial run matches an optimizer run with the same seed.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    if trial == 0 {
        return seed;
    }
    let mut rng = stream_rng(seed, AUX_STREAM_BASE + 1);
    rng.set_word_pos(u128::from(trial) * 2);
    rng.next_u64()
}

/// Uniform sampling with replacement over `0..n`.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    rng: ChaCha8Rng,
    n: usize,
}

impl IndexSampler {
    pub fn new(seed: u64, worker: u64, n: usize) -> Self {
        assert!(n > 0, "cannot sample from an empty range");
        assert!(worker < AUX_STREAM_BASE, "worker id collides with reserved streams");
        IndexSampler {
            rng: stream_rng(seed, worker),
            n,
        }
    }

    #[inline]
    pub fn next_index(&mut self) -> usize {
        self.rng.random_range(0..self.n)
    }
}

impl Iterator for IndexSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.next_index())
    }
}
