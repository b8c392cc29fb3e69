//! The four training loops: sequential SGD and SVRG, and their lock-free
//! multi-threaded counterparts Hogwild! and AsySVRG.
//!
//! Workers run without locks between metric checkpoints. A checkpoint joins
//! the workers, so every metrics row is an exact evaluation of the shared
//! parameters taken while nobody writes. Evaluation time is excluded from
//! `wall_seconds`.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use lfsgd_core::estimator::{combine_grad_partials, partition_ranges, SvrgAnchor};
use lfsgd_core::sampling::IndexSampler;
use lfsgd_core::{Dataset, DenseVector, GradientBuffer, ModelSpec, ParameterBlock};

use crate::error::{Error, Result};

/// Runs abort once the training loss exceeds this value.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Sgd,
    Hogwild,
    Svrg,
    AsySvrg,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Sgd, Algo::Hogwild, Algo::Svrg, Algo::AsySvrg];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Sgd => "sgd",
            Algo::Hogwild => "hogwild",
            Algo::Svrg => "svrg",
            Algo::AsySvrg => "asysvrg",
        }
    }

    pub fn is_svrg(self) -> bool {
        matches!(self, Algo::Svrg | Algo::AsySvrg)
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, Algo::Hogwild | Algo::AsySvrg)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected sgd, hogwild, svrg or asysvrg)"))
    }
}

/// An iteration count that may be derived from the dataset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    /// `ceil(n / threads)`.
    Auto,
    Fixed(usize),
}

impl Count {
    pub fn resolve(self, n: usize, threads: usize) -> usize {
        match self {
            Count::Auto => n.div_ceil(threads.max(1)),
            Count::Fixed(k) => k,
        }
    }
}

impl FromStr for Count {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Count::Auto);
        }
        s.parse()
            .map(Count::Fixed)
            .map_err(|_| format!("expected `auto` or a count, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    pub eta: f64,
    pub threads: usize,
    /// SVRG family: outer iterations.
    pub outer_iters: usize,
    /// SVRG family: inner steps per thread per outer iteration.
    pub inner_iters: Count,
    /// SGD family: epochs.
    pub epochs: usize,
    /// SGD family: iterations per thread per epoch.
    pub iters_per_epoch: Count,
    pub seed: u64,
    /// Metrics cadence, counted in epochs (SGD family) or outer iterations
    /// (SVRG family). The last epoch / outer iteration always gets a row.
    pub eval_every: usize,
}

impl RunConfig {
    pub fn new(algo: Algo, eta: f64) -> Self {
        RunConfig {
            algo,
            eta,
            threads: 1,
            outer_iters: 10,
            inner_iters: Count::Auto,
            epochs: 10,
            iters_per_epoch: Count::Auto,
            seed: 0,
            eval_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::usage(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if self.threads == 0 {
            return Err(Error::usage("threads must be >= 1"));
        }
        if !self.algo.is_parallel() && self.threads != 1 {
            return Err(Error::usage(format!("{} is sequential; threads must be 1", self.algo)));
        }
        if self.eval_every == 0 {
            return Err(Error::usage("eval_every must be >= 1"));
        }
        let (loops, inner, what) = if self.algo.is_svrg() {
            (self.outer_iters, self.inner_iters, "outer_iters / inner_iters")
        } else {
            (self.epochs, self.iters_per_epoch, "epochs / iters_per_epoch")
        };
        if loops == 0 || inner == Count::Fixed(0) {
            return Err(Error::usage(format!("{what} must be >= 1")));
        }
        Ok(())
    }

    /// Epochs or outer iterations.
    pub fn loops(&self) -> usize {
        if self.algo.is_svrg() {
            self.outer_iters
        } else {
            self.epochs
        }
    }

    /// Per-thread iterations in one epoch / outer iteration.
    pub fn inner_len(&self, n: usize) -> usize {
        let c = if self.algo.is_svrg() {
            self.inner_iters
        } else {
            self.iters_per_epoch
        };
        c.resolve(n, self.threads)
    }

    /// Gradient evaluations spent by one epoch / outer iteration.
    pub fn evals_per_loop(&self, n: usize) -> u64 {
        let inner = (self.threads * self.inner_len(n)) as u64;
        if self.algo.is_svrg() {
            n as u64 + inner
        } else {
            inner
        }
    }
}

/// One quiescent measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// `wall_seconds` divided by the baseline time unit; equals
    /// `wall_seconds` until [`RunMetrics::normalize_time`] is called.
    pub elapsed_units: f64,
    /// Training time so far, evaluation excluded.
    pub wall_seconds: f64,
    pub grad_evals: u64,
    pub train_loss: f64,
    pub grad_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
    pub final_params: DenseVector,
    /// Largest number of writes observed between a worker's read and its
    /// own write; a proxy for the delay bound.
    pub max_staleness: u64,
}

impl RunMetrics {
    pub fn normalize_time(&mut self, unit: f64) {
        for r in &mut self.rows {
            r.elapsed_units = r.wall_seconds / unit;
        }
    }

    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("a run always records its initial point")
    }

    pub fn final_loss(&self) -> f64 {
        self.last().train_loss
    }
}

/// Dispatches on `config.algo`, allocating the shared block when needed.
pub fn run(spec: &ModelSpec, data: &Dataset, config: &RunConfig) -> Result<RunMetrics> {
    match config.algo {
        Algo::Sgd => run_sgd(spec, data, config),
        Algo::Svrg => run_svrg(spec, data, config),
        Algo::Hogwild => run_hogwild(spec, data, config, &ParameterBlock::new(spec.num_params())),
        Algo::AsySvrg => run_asysvrg(spec, data, config, &ParameterBlock::new(spec.num_params())),
    }
}

/// `w <- w - eta * grad f_i(w)` with `i` drawn by worker stream 0.
pub fn run_sgd(spec: &ModelSpec, data: &Dataset, config: &RunConfig) -> Result<RunMetrics> {
    prepare(spec, data, config, Algo::Sgd)?;
    let n = data.len();
    let per_epoch = config.inner_len(n);
    let mut w = spec.init_params(config.seed);
    let mut sampler = IndexSampler::new(config.seed, 0, n);
    let mut g = GradientBuffer::new(spec.num_params());
    let mut rec = Recorder::new(spec, data, &w)?;
    for seg in segments(config.epochs, config.eval_every) {
        rec.timed(|| -> Result<()> {
            for _ in 0..seg * per_epoch {
                let (x, y) = data.instance(sampler.next_index());
                spec.grad_single(&w, x, y, &mut g)?;
                apply_step(&mut w, config.eta, &g);
            }
            Ok(())
        })?;
        rec.measure(&w, (seg * per_epoch) as u64)?;
    }
    Ok(rec.finish(w, 0))
}

/// Sequential SVRG with the anchor gradient computed in index order.
pub fn run_svrg(spec: &ModelSpec, data: &Dataset, config: &RunConfig) -> Result<RunMetrics> {
    prepare(spec, data, config, Algo::Svrg)?;
    let n = data.len();
    let m = config.inner_len(n);
    let mut w = spec.init_params(config.seed);
    let mut sampler = IndexSampler::new(config.seed, 0, n);
    let mut v = GradientBuffer::new(spec.num_params());
    let mut scratch = GradientBuffer::new(spec.num_params());
    let mut rec = Recorder::new(spec, data, &w)?;
    for seg in segments(config.outer_iters, config.eval_every) {
        rec.timed(|| -> Result<()> {
            for _ in 0..seg {
                let anchor = SvrgAnchor::new(spec, data, w.clone())?;
                for _ in 0..m {
                    let (x, y) = data.instance(sampler.next_index());
                    anchor.direction(spec, &w, x, y, &mut scratch, &mut v)?;
                    apply_step(&mut w, config.eta, &v);
                }
            }
            Ok(())
        })?;
        rec.measure(&w, (seg * (n + m)) as u64)?;
    }
    Ok(rec.finish(w, 0))
}

/// Hogwild!: `threads` workers each read the block cell by cell, sample an
/// instance, and write `-eta * grad` back without locks. `block` is
/// overwritten with the initial parameters first and holds the final ones
/// on return.
pub fn run_hogwild(spec: &ModelSpec, data: &Dataset, config: &RunConfig, block: &ParameterBlock) -> Result<RunMetrics> {
    prepare(spec, data, config, Algo::Hogwild)?;
    check_block(spec, block)?;
    let n = data.len();
    let per_epoch = config.inner_len(n);
    let init = spec.init_params(config.seed);
    block.store_all(&init)?;
    let shared = Shared::new(spec, data, block, config.eta);
    let mut workers = Worker::spawn_set(config, n, spec.num_params());
    let mut rec = Recorder::new(spec, data, &init)?;
    for seg in segments(config.epochs, config.eval_every) {
        let steps = seg * per_epoch;
        rec.timed(|| run_workers(&mut workers, |w| w.hogwild(&shared, steps)))?;
        rec.measure(&block.read_snapshot(), (config.threads * steps) as u64)?;
    }
    Ok(rec.finish(block.read_snapshot(), max_staleness(&workers)))
}

/// AsySVRG: per outer iteration, a full gradient at the current point
/// (static partition over the threads, combined in partition order), then
/// `threads` lock-free workers of `inner_len` steps each using the
/// variance-reduced direction. The next anchor is read after all workers
/// have joined.
pub fn run_asysvrg(spec: &ModelSpec, data: &Dataset, config: &RunConfig, block: &ParameterBlock) -> Result<RunMetrics> {
    prepare(spec, data, config, Algo::AsySvrg)?;
    check_block(spec, block)?;
    let n = data.len();
    let m = config.inner_len(n);
    let init = spec.init_params(config.seed);
    block.store_all(&init)?;
    let shared = Shared::new(spec, data, block, config.eta);
    let mut workers = Worker::spawn_set(config, n, spec.num_params());
    let mut rec = Recorder::new(spec, data, &init)?;
    for seg in segments(config.outer_iters, config.eval_every) {
        rec.timed(|| -> Result<()> {
            for _ in 0..seg {
                let u0 = block.read_snapshot();
                let full_grad = parallel_full_grad(spec, data, &u0, config.threads)?;
                let anchor = SvrgAnchor { params: u0, full_grad };
                run_workers(&mut workers, |w| w.asysvrg(&shared, &anchor, m))?;
            }
            Ok(())
        })?;
        rec.measure(&block.read_snapshot(), (seg * (n + config.threads * m)) as u64)?;
    }
    Ok(rec.finish(block.read_snapshot(), max_staleness(&workers)))
}

/// Full gradient over `parts` static blocks, one thread per block.
pub fn parallel_full_grad(spec: &ModelSpec, data: &Dataset, params: &[f64], parts: usize) -> Result<DenseVector> {
    let dim = spec.num_params();
    let block_sum = |r: std::ops::Range<usize>| -> Result<DenseVector> {
        let mut sum = DenseVector::zeros(dim);
        spec.partial_grad_sum(params, data, r, &mut sum)?;
        Ok(sum)
    };
    let ranges = partition_ranges(data.len(), parts);
    let partials: Vec<DenseVector> = if ranges.len() == 1 {
        vec![block_sum(ranges[0].clone())?]
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = ranges
                .iter()
                .map(|r| {
                    let block_sum = &block_sum;
                    s.spawn(move || block_sum(r.clone()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| Error::WorkerPanic)?)
                .collect::<Result<Vec<_>>>()
        })?
    };
    Ok(combine_grad_partials(&partials, data.len(), dim))
}

fn prepare(spec: &ModelSpec, data: &Dataset, config: &RunConfig, algo: Algo) -> Result<()> {
    if config.algo != algo {
        return Err(Error::usage(format!("config is for {}, not {algo}", config.algo)));
    }
    config.validate()?;
    spec.check_dataset(data)?;
    Ok(())
}

fn check_block(spec: &ModelSpec, block: &ParameterBlock) -> Result<()> {
    if block.len() != spec.num_params() {
        return Err(lfsgd_core::Error::DimensionMismatch {
            expected: spec.num_params(),
            got: block.len(),
        }
        .into());
    }
    Ok(())
}

/// Lengths of the stretches between checkpoints.
fn segments(total: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..total.div_ceil(every)).map(move |k| every.min(total - k * every))
}

fn apply_step(w: &mut [f64], eta: f64, g: &GradientBuffer) {
    let values = g.values();
    match g.support() {
        Some(support) => {
            for &k in support {
                w[k] -= eta * values[k];
            }
        }
        None => {
            for (wk, gk) in w.iter_mut().zip(values) {
                *wk -= eta * gk;
            }
        }
    }
}

struct Recorder<'a> {
    spec: &'a ModelSpec,
    data: &'a Dataset,
    rows: Vec<MetricsRow>,
    compute: Duration,
    grad_evals: u64,
}

impl<'a> Recorder<'a> {
    fn new(spec: &'a ModelSpec, data: &'a Dataset, init: &[f64]) -> Result<Self> {
        let mut rec = Recorder {
            spec,
            data,
            rows: Vec::new(),
            compute: Duration::ZERO,
            grad_evals: 0,
        };
        rec.measure(init, 0)?;
        Ok(rec)
    }

    fn timed<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.compute += start.elapsed();
        out
    }

    fn measure(&mut self, params: &[f64], new_evals: u64) -> Result<()> {
        self.grad_evals += new_evals;
        let (loss, grad) = self.spec.full_loss_and_grad(params, self.data)?;
        if !(loss.is_finite() && loss <= DIVERGENCE_LOSS) {
            return Err(Error::Diverged {
                grad_evals: self.grad_evals,
                loss,
            });
        }
        let secs = self.compute.as_secs_f64();
        self.rows.push(MetricsRow {
            elapsed_units: secs,
            wall_seconds: secs,
            grad_evals: self.grad_evals,
            train_loss: loss,
            grad_norm_sq: grad.norm_sq(),
        });
        Ok(())
    }

    fn finish(self, final_params: DenseVector, max_staleness: u64) -> RunMetrics {
        RunMetrics {
            rows: self.rows,
            final_params,
            max_staleness,
        }
    }
}

struct Shared<'a> {
    spec: &'a ModelSpec,
    data: &'a Dataset,
    block: &'a ParameterBlock,
    eta: f64,
    /// Counts completed writes across all workers.
    clock: AtomicU64,
}

impl<'a> Shared<'a> {
    fn new(spec: &'a ModelSpec, data: &'a Dataset, block: &'a ParameterBlock, eta: f64) -> Self {
        Shared {
            spec,
            data,
            block,
            eta,
            clock: AtomicU64::new(0),
        }
    }
}

/// Per-thread state that survives across checkpoints.
struct Worker {
    sampler: IndexSampler,
    snapshot: Vec<f64>,
    grad: GradientBuffer,
    scratch: GradientBuffer,
    max_staleness: u64,
}

impl Worker {
    fn spawn_set(config: &RunConfig, n: usize, dim: usize) -> Vec<Worker> {
        (0..config.threads as u64)
            .map(|id| Worker {
                sampler: IndexSampler::new(config.seed, id, n),
                snapshot: vec![0.0; dim],
                grad: GradientBuffer::new(dim),
                scratch: GradientBuffer::new(dim),
                max_staleness: 0,
            })
            .collect()
    }

    fn hogwild(&mut self, ctx: &Shared<'_>, steps: usize) -> Result<()> {
        for _ in 0..steps {
            let before = ctx.clock.load(Ordering::Relaxed);
            ctx.block.read_into(&mut self.snapshot)?;
            let (x, y) = ctx.data.instance(self.sampler.next_index());
            ctx.spec.grad_single(&self.snapshot, x, y, &mut self.grad)?;
            ctx.block.write_saxpy(ctx.eta, &self.grad)?;
            self.note_write(ctx, before);
        }
        Ok(())
    }

    fn asysvrg(&mut self, ctx: &Shared<'_>, anchor: &SvrgAnchor, steps: usize) -> Result<()> {
        for _ in 0..steps {
            let before = ctx.clock.load(Ordering::Relaxed);
            ctx.block.read_into(&mut self.snapshot)?;
            let (x, y) = ctx.data.instance(self.sampler.next_index());
            anchor.direction(ctx.spec, &self.snapshot, x, y, &mut self.scratch, &mut self.grad)?;
            ctx.block.write_saxpy(ctx.eta, &self.grad)?;
            self.note_write(ctx, before);
        }
        Ok(())
    }

    #[inline]
    fn note_write(&mut self, ctx: &Shared<'_>, before: u64) {
        let after = ctx.clock.fetch_add(1, Ordering::Relaxed);
        self.max_staleness = self.max_staleness.max(after.saturating_sub(before));
    }
}

fn max_staleness(workers: &[Worker]) -> u64 {
    workers.iter().map(|w| w.max_staleness).max().unwrap_or(0)
}

/// Runs `f` on every worker, one scoped thread each (inline for a single
/// worker), and returns the first error.
fn run_workers<F>(workers: &mut [Worker], f: F) -> Result<()>
where
    F: Fn(&mut Worker) -> Result<()> + Sync,
{
    if let [only] = workers {
        return f(only);
    }
    thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = workers.iter_mut().map(|w| s.spawn(move || f(w))).collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().map_err(|_| Error::WorkerPanic)?)
    })
}
