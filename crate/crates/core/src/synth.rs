//! Seeded synthetic datasets for desk-scale experiments.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;
use crate::sampling::stream_rng;
use crate::vectors::{Dataset, SparseVector};

/// Binary logistic-model data: features are i.i.d. standard normal scaled
/// by `1/sqrt(d)` (so `E||x||^2 = 1`), a planted weight vector is drawn
/// with i.i.d. standard normal entries scaled by `signal`, and each label is
/// `+1` with probability `sigmoid(x^T w*)`.
pub fn logistic_dataset(n: usize, d: usize, signal: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n/d", "must be >= 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let planted: Vec<f64> = (0..d).map(|_| signal * normal(&mut rng)).collect();
    let scale = 1.0 / math::sqrt(d as f64);
    let mut instances = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| scale * normal(&mut rng)).collect();
        let margin: f64 = x.iter().zip(&planted).map(|(a, b)| a * b).sum();
        let positive = rng.random_bool(math::sigmoid(margin));
        instances.push(SparseVector::from_dense(&x));
        labels.push(usize::from(positive));
    }
    Dataset::new(instances, labels, d, alloc::vec![-1, 1])
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
