//! Loss families `f_i(w)` and their (sub)gradients.
//!
//! Three models are supported: L2-regularized logistic regression, the
//! L2-regularized hinge-loss SVM, and a one-hidden-layer perceptron with a
//! sigmoid hidden layer and softmax output. All parameters live in one flat
//! vector described by a [`ParameterLayout`] so the shared store and the
//! optimizers never need to know which model they are driving.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math;
use crate::vectors::{check_len, dot, Dataset, DenseVector, SparseVector};

/// Standard deviation of the Gaussian used to initialize MLP weights
/// (variance 0.01).
pub const MLP_INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LogReg,
    Svm,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lambda: f64,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Hidden width; ignored by the linear models.
    pub hidden_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named row-major blocks tiling the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterLayout {
    pub total_dim: usize,
    pub segments: Vec<Segment>,
}

impl ParameterLayout {
    fn from_shapes(shapes: &[(&'static str, usize, usize)]) -> Self {
        let mut offset = 0;
        let segments = shapes
            .iter()
            .map(|&(name, rows, cols)| {
                let s = Segment {
                    name,
                    offset,
                    rows,
                    cols,
                };
                offset += rows * cols;
                s
            })
            .collect();
        ParameterLayout {
            total_dim: offset,
            segments,
        }
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

/// Gradient storage with an optional list of the coordinates that may be
/// nonzero. `support == None` means dense.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    values: DenseVector,
    support: Option<Vec<usize>>,
}

impl GradientBuffer {
    pub fn new(len: usize) -> Self {
        GradientBuffer {
            values: DenseVector::zeros(len),
            support: Some(Vec::new()),
        }
    }

    pub fn from_dense(values: DenseVector) -> Self {
        GradientBuffer { values, support: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn support(&self) -> Option<&[usize]> {
        self.support.as_deref()
    }

    pub fn into_values(self) -> DenseVector {
        self.values
    }

    pub fn norm_sq(&self) -> f64 {
        match &self.support {
            Some(s) => s.iter().map(|&i| self.values[i] * self.values[i]).sum(),
            None => self.values.norm_sq(),
        }
    }

    /// Zeroes the buffer, touching only the previous support when one is
    /// recorded.
    pub fn clear(&mut self) {
        match &mut self.support {
            Some(s) => {
                for &i in s.iter() {
                    self.values[i] = 0.0;
                }
                s.clear();
            }
            None => {
                self.values.fill(0.0);
                self.support = Some(Vec::new());
            }
        }
    }

    pub(crate) fn mark_dense(&mut self) {
        self.support = None;
    }

    pub(crate) fn set_support(&mut self, support: &[usize]) {
        match &mut self.support {
            Some(s) => {
                s.clear();
                s.extend_from_slice(support);
            }
            None => self.support = Some(support.to_vec()),
        }
    }
}

impl ModelSpec {
    pub fn logreg(input_dim: usize, lambda: f64) -> Result<Self> {
        Self::linear(ModelKind::LogReg, input_dim, lambda)
    }

    pub fn svm(input_dim: usize, lambda: f64) -> Result<Self> {
        Self::linear(ModelKind::Svm, input_dim, lambda)
    }

    fn linear(kind: ModelKind, input_dim: usize, lambda: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind,
            lambda,
            input_dim,
            num_classes: 2,
            hidden_width: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mlp(input_dim: usize, num_classes: usize, hidden_width: usize, lambda: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Mlp,
            lambda,
            input_dim,
            num_classes,
            hidden_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidModel("lambda must be finite and >= 0"));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidModel("input dimension must be >= 1"));
        }
        match self.kind {
            ModelKind::LogReg | ModelKind::Svm if self.num_classes != 2 => {
                Err(Error::InvalidModel("binary losses require exactly 2 classes"))
            }
            ModelKind::Mlp if self.num_classes < 2 => Err(Error::InvalidModel("mlp requires at least 2 classes")),
            ModelKind::Mlp if self.hidden_width == 0 => Err(Error::InvalidModel("mlp requires hidden width >= 1")),
            _ => Ok(()),
        }
    }

    pub fn layout(&self) -> ParameterLayout {
        match self.kind {
            ModelKind::LogReg | ModelKind::Svm => ParameterLayout::from_shapes(&[("w", 1, self.input_dim)]),
            ModelKind::Mlp => {
                let (d, h, k) = (self.input_dim, self.hidden_width, self.num_classes);
                ParameterLayout::from_shapes(&[("W1", h, d), ("b1", 1, h), ("W2", k, h), ("b2", 1, k)])
            }
        }
    }

    pub fn num_params(&self) -> usize {
        match self.kind {
            ModelKind::LogReg | ModelKind::Svm => self.input_dim,
            ModelKind::Mlp => {
                let (d, h, k) = (self.input_dim, self.hidden_width, self.num_classes);
                h * d + h + k * h + k
            }
        }
    }

    /// Starting point: zeros for the linear models; Gaussian weights with
    /// variance 0.01 and zero biases for the MLP.
    pub fn init_params(&self, seed: u64) -> DenseVector {
        let mut w = DenseVector::zeros(self.num_params());
        if self.kind == ModelKind::Mlp {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, MLP_INIT_STD).expect("valid normal");
            let layout = self.layout();
            for name in ["W1", "W2"] {
                let seg = layout.segment(name).expect("mlp segment");
                for v in &mut w[seg.range()] {
                    *v = normal.sample(&mut rng);
                }
            }
        }
        w
    }

    /// Checks the data shape against the model.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dim() > self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: data.dim(),
            });
        }
        if data.num_classes() != self.num_classes {
            return Err(Error::InvalidModel("dataset class count does not match model"));
        }
        Ok(())
    }

    fn check_inputs(&self, params: &[f64], x: &SparseVector, label: usize) -> Result<()> {
        check_len(self.num_params(), params.len())?;
        if x.dim() > self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.dim(),
            });
        }
        if label >= self.num_classes {
            return Err(Error::InvalidModel("label out of range"));
        }
        if let Some(k) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter(k));
        }
        Ok(())
    }

    /// `f_i(params)`, including the `lambda/2 * ||weights||^2` term.
    pub fn loss_single(&self, params: &[f64], x: &SparseVector, label: usize) -> Result<f64> {
        self.check_inputs(params, x, label)?;
        Ok(match self.kind {
            ModelKind::LogReg => {
                let margin = binary_sign(label) * dot(x, params)?;
                math::softplus(-margin) + self.weight_penalty(params)
            }
            ModelKind::Svm => {
                let margin = binary_sign(label) * dot(x, params)?;
                (1.0 - margin).max(0.0) + self.weight_penalty(params)
            }
            ModelKind::Mlp => {
                let fw = self.mlp_forward(params, x);
                fw.cross_entropy(label) + self.weight_penalty(params)
            }
        })
    }

    /// Writes `grad f_i(params)` into `out` (which is cleared first).
    ///
    /// For the linear models with `lambda == 0` the recorded support is
    /// exactly the instance's support; otherwise the gradient is dense.
    pub fn grad_single(&self, params: &[f64], x: &SparseVector, label: usize, out: &mut GradientBuffer) -> Result<()> {
        self.check_inputs(params, x, label)?;
        check_len(self.num_params(), out.len())?;
        out.clear();
        match self.kind {
            ModelKind::LogReg | ModelKind::Svm => {
                let y = binary_sign(label);
                let margin = y * dot(x, params)?;
                let coef = match self.kind {
                    ModelKind::LogReg => -math::sigmoid(-margin) * y,
                    // strict inequality: the hinge term is off at margin 1
                    _ if 1.0 - margin > 0.0 => -y,
                    _ => 0.0,
                };
                let g = out.values_mut();
                if self.lambda > 0.0 {
                    for (gk, wk) in g.iter_mut().zip(params) {
                        *gk = self.lambda * wk;
                    }
                    for (i, v) in x.iter() {
                        g[i] += coef * v;
                    }
                    out.mark_dense();
                } else {
                    for (i, v) in x.iter() {
                        g[i] = coef * v;
                    }
                    out.set_support(x.indices());
                }
            }
            ModelKind::Mlp => {
                self.mlp_backward(params, x, label, out.values_mut());
                out.mark_dense();
            }
        }
        Ok(())
    }

    /// Mean loss over the dataset, summed in index order.
    pub fn full_loss(&self, params: &[f64], data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in data.instances().iter().zip(data.labels()) {
            total += self.loss_single(params, x, y)?;
        }
        Ok(total / data.len() as f64)
    }

    /// Exact mean loss and gradient over all instances, accumulated
    /// sequentially in index order.
    pub fn full_loss_and_grad(&self, params: &[f64], data: &Dataset) -> Result<(f64, GradientBuffer)> {
        let mut sum = DenseVector::zeros(self.num_params());
        let loss = self.partial_loss_and_grad(params, data, 0..data.len(), &mut sum)?;
        let scale = 1.0 / data.len() as f64;
        for v in sum.iter_mut() {
            *v *= scale;
        }
        Ok((loss * scale, GradientBuffer::from_dense(sum)))
    }

    /// Accumulates the *sums* (not means) of loss and gradient over
    /// `range`, in index order, adding the gradient sum into `grad_sum`.
    pub fn partial_loss_and_grad(
        &self,
        params: &[f64],
        data: &Dataset,
        range: Range<usize>,
        grad_sum: &mut [f64],
    ) -> Result<f64> {
        check_len(self.num_params(), grad_sum.len())?;
        let mut g = GradientBuffer::new(self.num_params());
        let mut loss = 0.0;
        for i in range {
            let (x, y) = data.instance(i);
            loss += self.loss_single(params, x, y)?;
            self.grad_single(params, x, y, &mut g)?;
            add_into(grad_sum, &g);
        }
        Ok(loss)
    }

    /// Adds the gradient sum over `range` (index order) into `grad_sum`.
    pub fn partial_grad_sum(
        &self,
        params: &[f64],
        data: &Dataset,
        range: Range<usize>,
        grad_sum: &mut [f64],
    ) -> Result<()> {
        check_len(self.num_params(), grad_sum.len())?;
        let mut g = GradientBuffer::new(self.num_params());
        for i in range {
            let (x, y) = data.instance(i);
            self.grad_single(params, x, y, &mut g)?;
            add_into(grad_sum, &g);
        }
        Ok(())
    }

    /// Mean gradient only; used where the loss value is not needed.
    pub fn full_grad(&self, params: &[f64], data: &Dataset) -> Result<DenseVector> {
        let mut sum = DenseVector::zeros(self.num_params());
        self.partial_grad_sum(params, data, 0..data.len(), &mut sum)?;
        let scale = 1.0 / data.len() as f64;
        for v in sum.iter_mut() {
            *v *= scale;
        }
        Ok(sum)
    }

    /// Upper bound on the per-instance smoothness constant.
    ///
    /// Logistic: `max_i ||x_i||^2 / 4 + lambda`. SVM: `lambda`, the constant
    /// of the smooth regularizer only; the hinge part is covered by
    /// [`ModelSpec::grad_bound`].
    pub fn lipschitz_bound(&self, data: &Dataset) -> Result<f64> {
        match self.kind {
            ModelKind::LogReg => Ok(data.max_norm_sq() / 4.0 + self.lambda),
            ModelKind::Svm => Ok(self.lambda),
            ModelKind::Mlp => Err(Error::UnsupportedForMlp("lipschitz_bound")),
        }
    }

    /// `V` with `||grad f_i(w)|| <= V` for every instance and every
    /// `||w|| <= radius`.
    pub fn grad_bound(&self, data: &Dataset, radius: f64) -> Result<f64> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", "must be finite and >= 0"));
        }
        match self.kind {
            // both losses have a data-term coefficient of magnitude <= 1
            ModelKind::LogReg | ModelKind::Svm => Ok(math::sqrt(data.max_norm_sq()) + self.lambda * radius),
            ModelKind::Mlp => Err(Error::UnsupportedForMlp("grad_bound")),
        }
    }

    fn weight_penalty(&self, params: &[f64]) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let sq: f64 = match self.kind {
            ModelKind::LogReg | ModelKind::Svm => params.iter().map(|v| v * v).sum(),
            ModelKind::Mlp => {
                let layout = self.layout();
                ["W1", "W2"]
                    .iter()
                    .map(|n| {
                        let seg = layout.segment(n).expect("mlp segment");
                        params[seg.range()].iter().map(|v| v * v).sum::<f64>()
                    })
                    .sum()
            }
        };
        0.5 * self.lambda * sq
    }

    fn mlp_offsets(&self) -> MlpOffsets {
        let (d, h, k) = (self.input_dim, self.hidden_width, self.num_classes);
        MlpOffsets {
            d,
            h,
            k,
            b1: h * d,
            w2: h * d + h,
            b2: h * d + h + k * h,
        }
    }

    fn mlp_forward(&self, params: &[f64], x: &SparseVector) -> MlpForward {
        let o = self.mlp_offsets();
        let hidden: Vec<f64> = (0..o.h)
            .map(|j| {
                let row = &params[j * o.d..(j + 1) * o.d];
                let pre = params[o.b1 + j] + x.iter().map(|(i, v)| row[i] * v).sum::<f64>();
                math::sigmoid(pre)
            })
            .collect();
        let logits: Vec<f64> = (0..o.k)
            .map(|c| {
                let row = &params[o.w2 + c * o.h..o.w2 + (c + 1) * o.h];
                params[o.b2 + c] + row.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        MlpForward { hidden, logits }
    }

    fn mlp_backward(&self, params: &[f64], x: &SparseVector, label: usize, g: &mut [f64]) {
        let o = self.mlp_offsets();
        let fw = self.mlp_forward(params, x);
        // d loss / d logits = softmax - onehot
        let mut dz = softmax(&fw.logits);
        dz[label] -= 1.0;

        let mut dh = vec![0.0; o.h];
        for c in 0..o.k {
            let base = o.w2 + c * o.h;
            for j in 0..o.h {
                g[base + j] = dz[c] * fw.hidden[j] + self.lambda * params[base + j];
                dh[j] += params[base + j] * dz[c];
            }
            g[o.b2 + c] = dz[c];
        }
        for j in 0..o.h {
            let hj = fw.hidden[j];
            let da = dh[j] * hj * (1.0 - hj);
            let base = j * o.d;
            if self.lambda > 0.0 {
                for (gk, wk) in g[base..base + o.d].iter_mut().zip(&params[base..base + o.d]) {
                    *gk = self.lambda * wk;
                }
            }
            for (i, v) in x.iter() {
                g[base + i] += da * v;
            }
            g[o.b1 + j] = da;
        }
    }
}

struct MlpOffsets {
    d: usize,
    h: usize,
    k: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

struct MlpForward {
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl MlpForward {
    fn cross_entropy(&self, label: usize) -> f64 {
        log_sum_exp(&self.logits) - self.logits[label]
    }
}

/// Class 1 is the positive class.
#[inline]
fn binary_sign(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

fn add_into(sum: &mut [f64], g: &GradientBuffer) {
    match g.support() {
        Some(s) => {
            for &i in s {
                sum[i] += g.values()[i];
            }
        }
        None => {
            for (a, b) in sum.iter_mut().zip(g.values()) {
                *a += b;
            }
        }
    }
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| math::exp(z - max)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + math::ln(logits.iter().map(|z| math::exp(z - max)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn x2(a: f64, b: f64) -> SparseVector {
        SparseVector::from_pairs(2, vec![(0, a), (1, b)]).unwrap()
    }

    #[test]
    fn logreg_loss_at_zero_is_ln2() {
        let spec = ModelSpec::logreg(2, 0.0).unwrap();
        let l = spec.loss_single(&[0.0, 0.0], &x2(3.0, -1.0), 0).unwrap();
        assert_eq!(l, LN_2);
    }

    #[test]
    fn svm_loss_at_zero_is_one() {
        let spec = ModelSpec::svm(2, 0.0).unwrap();
        assert_eq!(spec.loss_single(&[0.0, 0.0], &x2(3.0, -1.0), 1).unwrap(), 1.0);
    }

    #[test]
    fn mlp_loss_at_zero_is_ln_k() {
        for k in [2usize, 3, 10] {
            let spec = ModelSpec::mlp(4, k, 3, 0.1).unwrap();
            let params = vec![0.0; spec.num_params()];
            let x = SparseVector::from_pairs(4, vec![(1, 2.0), (3, -1.0)]).unwrap();
            let l = spec.loss_single(&params, &x, 0).unwrap();
            assert!((l - math::ln(k as f64)).abs() < 1e-15, "{l}");
        }
    }

    #[test]
    fn logreg_grad_at_zero() {
        let spec = ModelSpec::logreg(2, 0.0).unwrap();
        let mut g = GradientBuffer::new(2);
        spec.grad_single(&[0.0, 0.0], &x2(1.0, 0.0), 1, &mut g).unwrap();
        assert_eq!(g.values(), &[-0.5, 0.0]);
    }

    #[test]
    fn svm_hinge_tie_break_gives_zero() {
        let spec = ModelSpec::svm(2, 0.0).unwrap();
        let mut g = GradientBuffer::new(2);
        // y x^T w = 1 exactly
        spec.grad_single(&[0.5, 0.0], &x2(2.0, 0.0), 1, &mut g).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_support_matches_instance_when_unregularized() {
        let spec = ModelSpec::logreg(6, 0.0).unwrap();
        let x = SparseVector::from_pairs(6, vec![(1, 1.0), (4, 2.0)]).unwrap();
        let mut g = GradientBuffer::new(6);
        spec.grad_single(&[0.1; 6], &x, 0, &mut g).unwrap();
        assert_eq!(g.support(), Some(&[1usize, 4][..]));
        let spec = ModelSpec::logreg(6, 0.1).unwrap();
        spec.grad_single(&[0.1; 6], &x, 0, &mut g).unwrap();
        assert_eq!(g.support(), None);
    }

    #[test]
    fn clear_resets_sparse_and_dense() {
        let spec = ModelSpec::logreg(3, 0.0).unwrap();
        let mut g = GradientBuffer::new(3);
        let x = SparseVector::from_pairs(3, vec![(2, 1.0)]).unwrap();
        spec.grad_single(&[0.0; 3], &x, 1, &mut g).unwrap();
        let y = SparseVector::from_pairs(3, vec![(0, 1.0)]).unwrap();
        spec.grad_single(&[0.0; 3], &y, 1, &mut g).unwrap();
        assert_eq!(g.values(), &[-0.5, 0.0, 0.0]);
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let p = softmax(&[700.0, -700.0, 699.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((log_sum_exp(&[700.0, 700.0]) - (700.0 + LN_2)).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_and_inputs() {
        assert!(ModelSpec::mlp(3, 1, 4, 0.0).is_err());
        assert!(ModelSpec::mlp(3, 3, 0, 0.0).is_err());
        assert!(ModelSpec::logreg(3, -1.0).is_err());
        let spec = ModelSpec::logreg(2, 0.0).unwrap();
        assert!(matches!(
            spec.loss_single(&[0.0], &x2(1.0, 1.0), 0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            spec.loss_single(&[0.0, f64::NAN], &x2(1.0, 1.0), 0),
            Err(Error::NonFiniteParameter(1))
        );
    }

    #[test]
    fn closed_form_bounds() {
        let one = |v: Vec<(usize, f64)>| SparseVector::from_pairs(2, v).unwrap();
        let d = Dataset::new(vec![one(vec![(0, 2.0)])], vec![1], 2, vec![-1, 1]).unwrap();
        assert_eq!(ModelSpec::logreg(2, 0.0).unwrap().lipschitz_bound(&d).unwrap(), 1.0);
        assert!((ModelSpec::logreg(2, 0.001).unwrap().lipschitz_bound(&d).unwrap() - 1.001).abs() < 1e-15);
        let mlp = ModelSpec::mlp(2, 2, 2, 0.0).unwrap();
        assert!(matches!(mlp.lipschitz_bound(&d), Err(Error::UnsupportedForMlp(_))));
        assert!(matches!(mlp.grad_bound(&d, 1.0), Err(Error::UnsupportedForMlp(_))));

        let d = Dataset::new(vec![one(vec![(0, 0.6), (1, 0.8)])], vec![0], 2, vec![-1, 1]).unwrap();
        assert_eq!(ModelSpec::logreg(2, 0.0).unwrap().grad_bound(&d, 5.0).unwrap(), 1.0);
        assert_eq!(ModelSpec::logreg(2, 0.3).unwrap().grad_bound(&d, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn layout_tiles_parameters() {
        let spec = ModelSpec::mlp(5, 3, 4, 0.0).unwrap();
        let layout = spec.layout();
        assert_eq!(layout.total_dim, spec.num_params());
        let mut next = 0;
        for seg in &layout.segments {
            assert_eq!(seg.offset, next);
            next += seg.len();
        }
        assert_eq!(next, layout.total_dim);
    }

    #[test]
    fn mlp_init_has_zero_biases() {
        let spec = ModelSpec::mlp(5, 3, 4, 0.0).unwrap();
        let w = spec.init_params(9);
        let layout = spec.layout();
        for name in ["b1", "b2"] {
            assert!(w[layout.segment(name).unwrap().range()].iter().all(|v| *v == 0.0));
        }
        assert!(w[layout.segment("W1").unwrap().range()].iter().any(|v| *v != 0.0));
        assert_eq!(w, spec.init_params(9));
    }
}
