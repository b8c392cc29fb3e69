//! Stochastic gradient estimators shared by the optimizers and the simulator:
//! the SVRG variance-reduced direction, deterministic partitioned full
//! gradients, and a Monte-Carlo probe of the estimators' second moments.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math;
use crate::models::{GradientBuffer, ModelSpec};
use crate::sampling::IndexSampler;
use crate::vectors::{check_len, Dataset, DenseVector, SparseVector};

/// Splits `0..n` into `parts` contiguous blocks whose sizes differ by at
/// most one. Empty blocks are kept so the block count is always `parts`.
pub fn partition_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Mean loss and gradient from per-block sums, combined in block order.
pub fn combine_partials(partials: &[(f64, DenseVector)], n: usize, dim: usize) -> (f64, DenseVector) {
    // start from the first block so a single block is returned unchanged
    let (mut loss, mut grad) = match partials.first() {
        Some((l, g)) => (*l, g.clone()),
        None => (0.0, DenseVector::zeros(dim)),
    };
    for (l, g) in partials.iter().skip(1) {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g.iter()) {
            *a += b;
        }
    }
    let scale = 1.0 / n as f64;
    for v in grad.iter_mut() {
        *v *= scale;
    }
    (loss * scale, grad)
}

/// Full loss and gradient summed block-by-block over `parts` static blocks.
/// With `parts == 1` this equals [`ModelSpec::full_loss_and_grad`] bit for
/// bit.
pub fn partitioned_loss_and_grad(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    parts: usize,
) -> Result<(f64, DenseVector)> {
    let partials = partition_ranges(data.len(), parts)
        .into_iter()
        .map(|r| {
            let mut sum = DenseVector::zeros(spec.num_params());
            let loss = spec.partial_loss_and_grad(params, data, r, &mut sum)?;
            Ok((loss, sum))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(combine_partials(&partials, data.len(), spec.num_params()))
}

/// Mean gradient from per-block sums combined in block order; the
/// gradient-only counterpart of [`combine_partials`].
pub fn combine_grad_partials(partials: &[DenseVector], n: usize, dim: usize) -> DenseVector {
    let mut grad = match partials.first() {
        Some(g) => g.clone(),
        None => DenseVector::zeros(dim),
    };
    for g in partials.iter().skip(1) {
        for (a, b) in grad.iter_mut().zip(g.iter()) {
            *a += b;
        }
    }
    let scale = 1.0 / n as f64;
    for v in grad.iter_mut() {
        *v *= scale;
    }
    grad
}

/// Anchor point `u0` of one SVRG outer iteration and its full gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgAnchor {
    pub params: DenseVector,
    pub full_grad: DenseVector,
}

impl SvrgAnchor {
    pub fn new(spec: &ModelSpec, data: &Dataset, params: DenseVector) -> Result<Self> {
        let full_grad = spec.full_grad(&params, data)?;
        Ok(SvrgAnchor { params, full_grad })
    }

    /// Writes `grad f_i(query) - grad f_i(anchor) + full_grad` into `out`.
    /// `scratch` holds the anchor gradient.
    pub fn direction(
        &self,
        spec: &ModelSpec,
        query: &[f64],
        x: &SparseVector,
        label: usize,
        scratch: &mut GradientBuffer,
        out: &mut GradientBuffer,
    ) -> Result<()> {
        spec.grad_single(query, x, label, out)?;
        spec.grad_single(&self.params, x, label, scratch)?;
        let anchor_g = scratch.values();
        let v = out.values_mut();
        for k in 0..v.len() {
            v[k] = (v[k] - anchor_g[k]) + self.full_grad[k];
        }
        out.mark_dense();
        Ok(())
    }
}

/// Welford accumulator for a running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        math::sqrt(self.variance() / self.count as f64)
    }
}

/// Monte-Carlo estimates of `E||v||^2` for the SVRG direction and of
/// `E||grad f_i(query)||^2` for the plain stochastic gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceProbe {
    pub mean_sq_svrg: f64,
    pub mean_sq_sgd: f64,
    pub std_err_svrg: f64,
    pub std_err_sgd: f64,
}

pub fn variance_probe(
    spec: &ModelSpec,
    data: &Dataset,
    anchor: &[f64],
    query: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VarianceProbe> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    check_len(spec.num_params(), anchor.len())?;
    check_len(spec.num_params(), query.len())?;
    let anchor = SvrgAnchor::new(spec, data, DenseVector::from(anchor.to_vec()))?;
    let mut sampler = IndexSampler::new(seed, 0, data.len());
    let mut scratch = GradientBuffer::new(spec.num_params());
    let mut v = GradientBuffer::new(spec.num_params());
    let mut g = GradientBuffer::new(spec.num_params());
    let (mut svrg, mut sgd) = (RunningStats::default(), RunningStats::default());
    for _ in 0..samples {
        let (x, y) = data.instance(sampler.next_index());
        anchor.direction(spec, query, x, y, &mut scratch, &mut v)?;
        spec.grad_single(query, x, y, &mut g)?;
        svrg.push(v.norm_sq());
        sgd.push(g.norm_sq());
    }
    Ok(VarianceProbe {
        mean_sq_svrg: svrg.mean(),
        mean_sq_sgd: sgd.mean(),
        std_err_svrg: svrg.std_error(),
        std_err_sgd: sgd.std_error(),
    })
}
