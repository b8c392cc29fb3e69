#![allow(dead_code)]

use lfsgd_core::{Dataset, SparseVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sparse dataset with roughly `density * d` nonzeros per row.
pub fn random_dataset(n: usize, d: usize, classes: usize, density: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let mut pairs = Vec::new();
        for k in 0..d {
            if r.random_bool(density) {
                pairs.push((k, r.random_range(-1.0..1.0)));
            }
        }
        xs.push(SparseVector::from_pairs(d, pairs).unwrap());
        ys.push(i % classes);
    }
    let class_labels = if classes == 2 {
        vec![-1, 1]
    } else {
        (0..classes as i64).collect()
    };
    Dataset::new(xs, ys, d, class_labels).unwrap()
}

pub fn random_vec(r: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn dense(x: &SparseVector, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for (i, val) in x.indices().iter().zip(x.values()) {
        v[*i] = *val;
    }
    v
}

pub fn sign(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq(a: &[f64]) -> f64 {
    dot(a, a)
}

// Straightforward re-implementations of the three losses, used as oracles.

pub fn logreg_loss(w: &[f64], x: &[f64], label: usize, lambda: f64) -> f64 {
    let m = sign(label) * dot(w, x);
    (1.0 + (-m).exp()).ln() + 0.5 * lambda * sq(w)
}

pub fn svm_loss(w: &[f64], x: &[f64], label: usize, lambda: f64) -> f64 {
    let m = sign(label) * dot(w, x);
    (1.0 - m).max(0.0) + 0.5 * lambda * sq(w)
}

/// Layout: W1 (h x d, row-major), b1 (h), W2 (k x h), b2 (k).
pub fn mlp_loss(p: &[f64], x: &[f64], label: usize, d: usize, h: usize, k: usize, lambda: f64) -> f64 {
    let w1 = &p[..h * d];
    let b1 = &p[h * d..h * d + h];
    let w2 = &p[h * d + h..h * d + h + k * h];
    let b2 = &p[h * d + h + k * h..];
    let hidden: Vec<f64> = (0..h)
        .map(|j| 1.0 / (1.0 + (-(dot(&w1[j * d..(j + 1) * d], x) + b1[j])).exp()))
        .collect();
    let logits: Vec<f64> = (0..k).map(|c| dot(&w2[c * h..(c + 1) * h], &hidden) + b2[c]).collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    z.ln() - logits[label] + 0.5 * lambda * (sq(w1) + sq(w2))
}

/// Central finite differences of `f` at `x`.
pub fn fd_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let up = f(&p);
            p[k] = orig - h;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||b||, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    diff / sq(b).sqrt().max(floor)
}
