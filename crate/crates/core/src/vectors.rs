//! Dense and sparse vectors plus the labeled [`Dataset`] every other module
//! consumes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Fixed-length vector of `f64`, used for parameters and gradients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        DenseVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn norm_sq(&self) -> f64 {
        l2_norm_sq(&self.0)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) -> Result<()> {
        check_len(self.len(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        DenseVector(v)
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Sparse vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_len(indices.len(), values.len())?;
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid(
                    "indices",
                    format!("not strictly increasing ({} then {})", w[0], w[1]),
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::invalid(
                    "indices",
                    format!("index {last} out of range for dim {dim}"),
                ));
            }
        }
        Ok(SparseVector { indices, values, dim })
    }

    /// Builds a vector from `(index, value)` pairs in any order. Duplicate
    /// indices are rejected.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let (indices, values) = pairs.into_iter().unzip();
        Self::new(dim, indices, values)
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        SparseVector {
            indices,
            values,
            dim: dense.len(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm_sq(&self) -> f64 {
        l2_norm_sq(&self.values)
    }

    pub fn to_dense(&self) -> DenseVector {
        let mut out = DenseVector::zeros(self.dim);
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub(crate) fn set_dim(&mut self, dim: usize) {
        debug_assert!(self.indices.last().is_none_or(|&i| i < dim));
        self.dim = dim;
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Sparse-dense inner product. Requires `a.dim() <= b.len()`.
pub fn dot(a: &SparseVector, b: &[f64]) -> Result<f64> {
    if a.dim > b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.len(),
        });
    }
    Ok(a.iter().map(|(i, v)| v * b[i]).sum())
}

pub fn l2_norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Labeled sparse instances with labels remapped to `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<SparseVector>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
    /// Original label value for each class id.
    class_labels: Vec<i64>,
}

impl Dataset {
    pub fn new(instances: Vec<SparseVector>, labels: Vec<usize>, dim: usize, class_labels: Vec<i64>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_len(instances.len(), labels.len())?;
        let num_classes = class_labels.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(
                "labels",
                format!("class id {bad} >= num_classes {num_classes}"),
            ));
        }
        let mut instances = instances;
        for x in &mut instances {
            if x.indices.last().is_some_and(|&i| i >= dim) {
                return Err(Error::invalid("dim", "instance index exceeds dataset dim"));
            }
            x.set_dim(dim);
        }
        Ok(Dataset {
            instances,
            labels,
            dim,
            num_classes,
            class_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn instances(&self) -> &[SparseVector] {
        &self.instances
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_labels(&self) -> &[i64] {
        &self.class_labels
    }

    pub fn instance(&self, i: usize) -> (&SparseVector, usize) {
        (&self.instances[i], self.labels[i])
    }

    pub fn max_norm_sq(&self) -> f64 {
        self.instances.iter().map(SparseVector::norm_sq).fold(0.0, f64::max)
    }

    /// First `n` instances (all of them if `n >= len`).
    pub fn truncated(&self, n: usize) -> Result<Dataset> {
        let n = n.min(self.len());
        Dataset::new(
            self.instances[..n].to_vec(),
            self.labels[..n].to_vec(),
            self.dim,
            self.class_labels.clone(),
        )
    }

    /// Scales every feature by the inverse of its maximum absolute value so
    /// all entries land in `[-1, 1]`. Features that are identically zero are
    /// left untouched.
    pub fn scale_max_abs(&mut self) {
        let mut max_abs = vec![0.0f64; self.dim];
        for x in &self.instances {
            for (i, v) in x.iter() {
                max_abs[i] = max_abs[i].max(v.abs());
            }
        }
        for x in &mut self.instances {
            let idx = x.indices.clone();
            for (v, i) in x.values_mut().iter_mut().zip(idx) {
                if max_abs[i] > 0.0 {
                    *v /= max_abs[i];
                }
            }
        }
    }

    /// Binary view of a multi-class dataset: `positive` becomes class 1.
    /// With `negative = None` every other class becomes class 0; otherwise
    /// only instances of the two named classes are kept.
    pub fn binary(&self, positive: usize, negative: Option<usize>) -> Result<Dataset> {
        if positive >= self.num_classes || negative.is_some_and(|c| c >= self.num_classes) {
            return Err(Error::invalid("class", "class id out of range"));
        }
        if negative == Some(positive) {
            return Err(Error::invalid("class", "positive and negative class coincide"));
        }
        let mut instances = Vec::new();
        let mut labels = Vec::new();
        for (x, &y) in self.instances.iter().zip(&self.labels) {
            let keep = match negative {
                None => true,
                Some(neg) => y == neg || y == positive,
            };
            if keep {
                instances.push(x.clone());
                labels.push(usize::from(y == positive));
            }
        }
        Dataset::new(instances, labels, self.dim, vec![-1, 1])
    }
}
