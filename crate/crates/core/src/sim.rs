//! Deterministic simulator of the asynchronous update model.
//!
//! The simulator materializes the serialized write sequence
//! `w_{t+1} = w_t - eta * B_t * g_t` together with the reads
//! `w_hat_t = w_{a(t)} - eta * sum_{j=a(t)}^{t-1} P_{t,j} * g_j`, where
//! `B_t` drops each coordinate of the new gradient independently with
//! probability `1 - keep_prob`, `P_{t,j}` exposes each coordinate of a
//! pending gradient with probability `partial_prob`, and the delay
//! `t - a(t)` is drawn uniformly from the values allowed by the bound `tau`
//! and by `a(t)` being non-decreasing. Every gradient older than `tau` steps
//! is therefore fully visible in every read.
//!
//! Expectations are estimated by averaging per-step statistics over
//! independent trials; per-step `q` values are exact finite-sum evaluations.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{RunningStats, SvrgAnchor};
use crate::models::{GradientBuffer, ModelSpec};
use crate::sampling::{stream_rng, trial_seed, IndexSampler, AUX_STREAM_BASE};
use crate::theory::geometric_sum;
use crate::vectors::{Dataset, DenseVector};

/// Monte-Carlo slack applied by the `check_*` functions.
pub const CHECK_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimAlgo {
    Hogwild {
        steps: usize,
    },
    /// `inner` is the length of the serialized inner write sequence (all
    /// threads together).
    AsySvrg {
        outer: usize,
        inner: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub algo: SimAlgo,
    pub tau: usize,
    pub keep_prob: f64,
    pub partial_prob: f64,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Keep the full per-step record of trial 0.
    pub record_detail: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::invalid("keep_prob", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.partial_prob) {
            return Err(Error::invalid("partial_prob", "must lie in [0, 1]"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", "must be finite and >= 0"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        match self.algo {
            SimAlgo::Hogwild { steps: 0 } => Err(Error::invalid("steps", "must be >= 1")),
            SimAlgo::AsySvrg { outer, inner } if outer == 0 || inner == 0 => {
                Err(Error::invalid("outer/inner", "must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn total_steps(&self) -> usize {
        match self.algo {
            SimAlgo::Hogwild { steps } => steps,
            SimAlgo::AsySvrg { outer, inner } => outer * inner,
        }
    }

    pub fn is_asysvrg(&self) -> bool {
        matches!(self.algo, SimAlgo::AsySvrg { .. })
    }
}

/// Per-step values of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValues {
    /// `q` at the read point `w_hat_t`.
    pub q_hat: f64,
    /// `q` at the write-sequence point `w_t`.
    pub q_w: f64,
    /// `||w_t - w_hat_t||^2`.
    pub gap_sq: f64,
    pub delay: usize,
    /// Squared norm of the realized update direction (gradient or SVRG
    /// direction) before masking.
    pub dir_norm_sq: f64,
}

/// Full record of one step of trial 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub w: DenseVector,
    pub w_hat: DenseVector,
    pub index: usize,
    pub keep_mask: Vec<bool>,
    pub delay: usize,
    pub values: StepValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub steps: Vec<StepValues>,
    pub detail: Vec<StepRecord>,
    pub final_params: DenseVector,
    pub keep_count: u64,
    pub mask_draws: u64,
}

/// Position of a step within the write sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepPos {
    pub t: usize,
    pub outer: usize,
    pub inner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub pos: StepPos,
    pub q_hat: RunningStats,
    pub q_w: RunningStats,
    pub gap_sq: RunningStats,
    pub delay: RunningStats,
    pub dir_norm_sq: RunningStats,
}

/// Statistics aggregated over trials, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub config: SimConfig,
    pub steps: Vec<StepStats>,
    /// Per-step record of trial 0 (empty unless `record_detail`).
    pub detail: Vec<StepRecord>,
    /// Final parameters of trial 0.
    pub final_params: DenseVector,
    pub max_delay: usize,
    /// Empirical mean of the `B_t` diagonal entries (each entry is one draw).
    pub keep_mean: f64,
    pub keep_std_err: f64,
    pub mask_draws: u64,
    pub keep_count: u64,
    pub trials: usize,
}

impl SimTrace {
    pub fn new(config: SimConfig) -> Self {
        let steps = (0..config.total_steps())
            .map(|t| {
                let (outer, inner) = match config.algo {
                    SimAlgo::Hogwild { .. } => (0, t),
                    SimAlgo::AsySvrg { inner, .. } => (t / inner, t % inner),
                };
                StepStats {
                    pos: StepPos { t, outer, inner },
                    q_hat: RunningStats::default(),
                    q_w: RunningStats::default(),
                    gap_sq: RunningStats::default(),
                    delay: RunningStats::default(),
                    dir_norm_sq: RunningStats::default(),
                }
            })
            .collect();
        SimTrace {
            config,
            steps,
            detail: Vec::new(),
            final_params: DenseVector::default(),
            max_delay: 0,
            keep_mean: 0.0,
            keep_std_err: 0.0,
            mask_draws: 0,
            keep_count: 0,
            trials: 0,
        }
    }

    /// Folds one trial in. Trials must be pushed in trial order for the
    /// aggregate to be reproducible.
    pub fn push_trial(&mut self, trial: TrialTrace) {
        assert_eq!(trial.steps.len(), self.steps.len(), "trial length mismatch");
        for (agg, v) in self.steps.iter_mut().zip(&trial.steps) {
            agg.q_hat.push(v.q_hat);
            agg.q_w.push(v.q_w);
            agg.gap_sq.push(v.gap_sq);
            agg.delay.push(v.delay as f64);
            agg.dir_norm_sq.push(v.dir_norm_sq);
            self.max_delay = self.max_delay.max(v.delay);
        }
        if self.trials == 0 {
            self.detail = trial.detail;
            self.final_params = trial.final_params;
        }
        self.trials += 1;

        self.keep_count += trial.keep_count;
        self.mask_draws += trial.mask_draws;
        if self.mask_draws > 0 {
            let n = self.mask_draws as f64;
            self.keep_mean = self.keep_count as f64 / n;
            let p = self.keep_mean;
            self.keep_std_err = crate::math::sqrt(p * (1.0 - p) / n);
        }
    }
}

/// Runs all trials sequentially.
pub fn simulate(spec: &ModelSpec, data: &Dataset, config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    spec.check_dataset(data)?;
    let mut trace = SimTrace::new(*config);
    for k in 0..config.trials {
        trace.push_trial(simulate_trial(spec, data, config, k)?);
    }
    Ok(trace)
}

/// One independent trial. Trial 0 uses `config.seed` directly, so with
/// `tau == 0` and `keep_prob == 1` it reproduces the sequential optimizers
/// run with the same seed.
pub fn simulate_trial(spec: &ModelSpec, data: &Dataset, config: &SimConfig, trial: usize) -> Result<TrialTrace> {
    config.validate()?;
    let seed = trial_seed(config.seed, trial as u64);
    let mut state = TrialState::new(spec, data, config, seed, trial == 0 && config.record_detail);
    match config.algo {
        SimAlgo::Hogwild { steps } => {
            for _ in 0..steps {
                state.step(None)?;
            }
        }
        SimAlgo::AsySvrg { outer, inner } => {
            for _ in 0..outer {
                let anchor = SvrgAnchor::new(spec, data, state.w.clone())?;
                let anchor_grads = per_instance_grads(spec, data, &anchor.params)?;
                state.start_epoch();
                for _ in 0..inner {
                    state.step(Some((&anchor, &anchor_grads)))?;
                }
            }
        }
    }
    Ok(state.finish())
}

struct TrialState<'a> {
    spec: &'a ModelSpec,
    data: &'a Dataset,
    config: &'a SimConfig,
    sampler: IndexSampler,
    aux: rand_chacha::ChaCha8Rng,
    w: DenseVector,
    /// `history[k]` is `w_{t-k}`; at most `tau + 1` entries.
    history: VecDeque<DenseVector>,
    /// `pending[k]` is the direction computed at step `t-1-k`.
    pending: VecDeque<DenseVector>,
    prev_delay: usize,
    since_epoch: usize,
    out: TrialTrace,
    record: bool,
    grad: GradientBuffer,
    scratch: GradientBuffer,
}

type Anchor<'b> = (&'b SvrgAnchor, &'b [DenseVector]);

impl<'a> TrialState<'a> {
    fn new(spec: &'a ModelSpec, data: &'a Dataset, config: &'a SimConfig, seed: u64, record: bool) -> Self {
        let w = spec.init_params(config.seed);
        let dim = spec.num_params();
        TrialState {
            spec,
            data,
            config,
            sampler: IndexSampler::new(seed, 0, data.len()),
            aux: stream_rng(seed, AUX_STREAM_BASE),
            history: VecDeque::from([w.clone()]),
            w,
            pending: VecDeque::new(),
            prev_delay: 0,
            since_epoch: 0,
            out: TrialTrace {
                steps: Vec::with_capacity(config.total_steps()),
                detail: Vec::new(),
                final_params: DenseVector::default(),
                keep_count: 0,
                mask_draws: 0,
            },
            record,
            grad: GradientBuffer::new(dim),
            scratch: GradientBuffer::new(dim),
        }
    }

    /// Outer-loop boundary: every pending write has landed.
    fn start_epoch(&mut self) {
        self.history.clear();
        self.history.push_back(self.w.clone());
        self.pending.clear();
        self.prev_delay = 0;
        self.since_epoch = 0;
    }

    fn step(&mut self, anchor: Option<Anchor<'_>>) -> Result<()> {
        let tau = self.config.tau;
        let eta = self.config.eta;

        let max_delay = tau.min(self.since_epoch).min(self.prev_delay + 1);
        let delay = if max_delay == 0 {
            0
        } else {
            self.aux.random_range(0..=max_delay)
        };

        // read: w_{a(t)} plus a partial view of the pending directions
        let mut w_hat = self.history[delay].clone();
        for pending in self.pending.iter().take(delay) {
            for (wk, gk) in w_hat.iter_mut().zip(pending.iter()) {
                if self.aux.random_bool(self.config.partial_prob) {
                    *wk -= eta * gk;
                }
            }
        }

        let index = self.sampler.next_index();
        let (x, y) = self.data.instance(index);
        match anchor {
            None => self.spec.grad_single(&w_hat, x, y, &mut self.grad)?,
            Some((a, _)) => a.direction(self.spec, &w_hat, x, y, &mut self.scratch, &mut self.grad)?,
        }

        let q_w = q_value(self.spec, self.data, &self.w, anchor)?;
        let q_hat = if delay == 0 {
            q_w
        } else {
            q_value(self.spec, self.data, &w_hat, anchor)?
        };
        let gap_sq: f64 = self.w.iter().zip(w_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let values = StepValues {
            q_hat,
            q_w,
            gap_sq,
            delay,
            dir_norm_sq: self.grad.norm_sq(),
        };

        // write: w_{t+1} = w_t - eta * B_t * g, over the gradient's support
        let record_w = self.record.then(|| self.w.clone());
        let dim = self.w.len();
        let mut keep_mask = if self.record { vec![false; dim] } else { Vec::new() };
        let keep_prob = self.config.keep_prob;
        let g = self.grad.values();
        let mut apply = |k: usize, w: &mut DenseVector, aux: &mut rand_chacha::ChaCha8Rng, out: &mut TrialTrace| {
            let keep = aux.random_bool(keep_prob);
            out.mask_draws += 1;
            if keep {
                out.keep_count += 1;
                w[k] -= eta * g[k];
            }
            if !keep_mask.is_empty() {
                keep_mask[k] = keep;
            }
        };
        match self.grad.support() {
            Some(support) => {
                for &k in support {
                    apply(k, &mut self.w, &mut self.aux, &mut self.out);
                }
            }
            None => {
                for k in 0..dim {
                    apply(k, &mut self.w, &mut self.aux, &mut self.out);
                }
            }
        }

        if let Some(w) = record_w {
            self.out.detail.push(StepRecord {
                w,
                w_hat,
                index,
                keep_mask,
                delay,
                values,
            });
        }
        self.out.steps.push(values);

        let mut dense = DenseVector::zeros(dim);
        dense.copy_from_slice(self.grad.values());
        self.pending.push_front(dense);
        self.pending.truncate(tau);
        self.history.push_front(self.w.clone());
        self.history.truncate(tau + 1);
        self.prev_delay = delay;
        self.since_epoch += 1;
        Ok(())
    }

    fn finish(mut self) -> TrialTrace {
        self.out.final_params = self.w;
        self.out
    }
}

fn per_instance_grads(spec: &ModelSpec, data: &Dataset, params: &[f64]) -> Result<Vec<DenseVector>> {
    let mut g = GradientBuffer::new(spec.num_params());
    (0..data.len())
        .map(|i| {
            let (x, y) = data.instance(i);
            spec.grad_single(params, x, y, &mut g)?;
            Ok(DenseVector::from(g.values().to_vec()))
        })
        .collect()
}

/// `q(x) = (1/n) sum_i ||d_i(x)||^2` where `d_i` is the plain per-instance
/// gradient, or the SVRG direction when an anchor is given.
pub fn q_value(
    spec: &ModelSpec,
    data: &Dataset,
    params: &[f64],
    anchor: Option<(&SvrgAnchor, &[DenseVector])>,
) -> Result<f64> {
    let mut g = GradientBuffer::new(spec.num_params());
    let mut total = 0.0;
    for i in 0..data.len() {
        let (x, y) = data.instance(i);
        spec.grad_single(params, x, y, &mut g)?;
        total += match anchor {
            None => g.norm_sq(),
            Some((a, grads)) => g
                .values()
                .iter()
                .zip(grads[i].iter())
                .zip(a.full_grad.iter())
                .map(|((gi, ai), f)| {
                    let v = (gi - ai) + f;
                    v * v
                })
                .sum(),
        };
    }
    Ok(total / data.len() as f64)
}

/// Result of one lemma check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    /// Largest observed ratio (meaning depends on the check).
    pub max_ratio: f64,
    /// Step at which `max_ratio` occurs.
    pub at_step: usize,
    /// Threshold the ratio is compared against (slack included).
    pub threshold: f64,
    pub holds: bool,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn report(ratios: impl Iterator<Item = (usize, f64)>, threshold: f64) -> CheckReport {
    let (at_step, max_ratio) = ratios.fold((0, 0.0f64), |best, (t, r)| if r > best.1 { (t, r) } else { best });
    CheckReport {
        max_ratio,
        at_step,
        threshold,
        holds: max_ratio <= threshold,
    }
}

/// `E q(w_hat_t) <= rho E q(w_hat_{t+1})` over consecutive steps (within one
/// outer iteration for AsySVRG, where `q` depends on the anchor).
pub fn check_q_ratio(trace: &SimTrace, rho: f64) -> Result<CheckReport> {
    if trace.steps.len() < 2 {
        return Err(Error::invalid("trace", "needs at least 2 steps"));
    }
    let ratios = trace
        .steps
        .windows(2)
        .filter(|w| w[0].pos.outer == w[1].pos.outer)
        .map(|w| (w[0].pos.t, ratio(w[0].q_hat.mean(), w[1].q_hat.mean())));
    Ok(report(ratios, rho * CHECK_SLACK))
}

/// Gap between the write and read sequences against its bound.
///
/// Hogwild!: `E||w_t - w_hat_t||^2 <= 4 eta^2 tau rho G E q(w_hat_t)`.
/// AsySVRG: the same bound, and also
/// `E||u - u_hat||^2 <= 4 eta^2 tau rho^2 G E q(u)`; the larger of the two
/// ratios is reported. `G = (rho^tau - 1)/(rho - 1)`, zero when `tau == 0`.
pub fn check_gap_bound(trace: &SimTrace, rho: f64) -> Result<CheckReport> {
    if trace.steps.len() < 2 {
        return Err(Error::invalid("trace", "needs at least 2 steps"));
    }
    let c = &trace.config;
    let tau = c.tau as u32;
    let base = 4.0 * c.eta * c.eta * f64::from(tau) * rho * geometric_sum(rho, tau);
    let asysvrg = c.is_asysvrg();
    let ratios = trace.steps.iter().map(|s| {
        let gap = s.gap_sq.mean();
        let mut r = ratio(gap, base * s.q_hat.mean());
        if asysvrg {
            r = r.max(ratio(gap, base * rho * s.q_w.mean()));
        }
        (s.pos.t, r)
    });
    Ok(report(ratios, CHECK_SLACK))
}

/// AsySVRG only: `E q(u_hat) < rho E q(u)` at every step.
pub fn check_qhat_vs_q(trace: &SimTrace, rho: f64) -> Result<CheckReport> {
    if !trace.config.is_asysvrg() {
        return Err(Error::invalid("trace", "requires an AsySVRG trace"));
    }
    let ratios = trace
        .steps
        .iter()
        .map(|s| (s.pos.t, ratio(s.q_hat.mean(), s.q_w.mean())));
    Ok(report(ratios, rho * CHECK_SLACK))
}

/// Bound-column values for one step, as emitted by the report CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub pos: StepPos,
    pub q_hat: f64,
    pub q_w: f64,
    pub gap_sq: f64,
    pub gap_bound: f64,
    /// `E q(w_hat_t) / E q(w_hat_{t+1})`; NaN at the last step of an outer
    /// iteration.
    pub ratio: f64,
}

pub fn bound_rows(trace: &SimTrace, rho: f64) -> Vec<BoundRow> {
    let c = &trace.config;
    let tau = c.tau as u32;
    let base = 4.0 * c.eta * c.eta * f64::from(tau) * rho * geometric_sum(rho, tau);
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let next = trace.steps.get(k + 1).filter(|n| n.pos.outer == s.pos.outer);
            BoundRow {
                pos: s.pos,
                q_hat: s.q_hat.mean(),
                q_w: s.q_w.mean(),
                gap_sq: s.gap_sq.mean(),
                gap_bound: base * s.q_hat.mean(),
                ratio: next.map_or(f64::NAN, |n| ratio(s.q_hat.mean(), n.q_hat.mean())),
            }
        })
        .collect()
}
