//! The CPU-time unit: one single-threaded Hogwild! pass over the data.

use lfsgd_core::{Dataset, ModelSpec};

use crate::error::Result;
use crate::optim::{run_hogwild, Algo, Count, RunConfig};

pub const BASELINE_REPEATS: usize = 3;

/// Median wall time of [`BASELINE_REPEATS`] single-thread Hogwild! passes
/// of `n` iterations each, evaluation excluded. Measured afresh on every
/// call because the unit is machine-relative. The passes use a zero
/// stepsize: the work per iteration does not depend on it and the timing
/// run can never diverge.
pub fn baseline_unit(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<f64> {
    let config = RunConfig {
        threads: 1,
        epochs: 1,
        iters_per_epoch: Count::Auto,
        seed,
        ..RunConfig::new(Algo::Hogwild, 0.0)
    };
    let block = lfsgd_core::ParameterBlock::new(spec.num_params());
    let mut times = (0..BASELINE_REPEATS)
        .map(|_| run_hogwild(spec, data, &config, &block).map(|m| m.last().wall_seconds))
        .collect::<Result<Vec<f64>>>()?;
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2].max(f64::MIN_POSITIVE))
}
