//! Multi-threaded driver for the asynchronous-update simulator and its
//! per-step report CSV.

use std::io::Write;
use std::thread;

use lfsgd_core::sim::{
    bound_rows, check_gap_bound, check_q_ratio, check_qhat_vs_q, simulate_trial, CheckReport, SimConfig, SimTrace,
    TrialTrace,
};
use lfsgd_core::{Dataset, ModelSpec};

use crate::error::{Error, Result};
use crate::metrics::format_float;

pub const REPORT_HEADER: [&str; 12] = [
    "t",
    "outer",
    "inner",
    "delay_mean",
    "dir_norm_sq",
    "trials",
    "q_hat",
    "q_w",
    "gap_sq",
    "gap_bound",
    "ratio",
    "rho",
];

/// Same result as [`lfsgd_core::sim::simulate`], with trials spread over
/// `threads` threads. Trials are folded in trial order, so the aggregate
/// does not depend on `threads`.
pub fn simulate_parallel(spec: &ModelSpec, data: &Dataset, config: &SimConfig, threads: usize) -> Result<SimTrace> {
    config.validate()?;
    spec.check_dataset(data)?;
    let threads = threads.clamp(1, config.trials);
    let per_thread = config.trials.div_ceil(threads);
    let chunks: Vec<Vec<TrialTrace>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|k| {
                let range = k * per_thread..((k + 1) * per_thread).min(config.trials);
                s.spawn(move || {
                    range
                        .map(|trial| simulate_trial(spec, data, config, trial))
                        .collect::<lfsgd_core::Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| Error::WorkerPanic)?.map_err(Error::from))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut trace = SimTrace::new(*config);
    for trial in chunks.into_iter().flatten() {
        trace.push_trial(trial);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimChecks {
    pub rho: f64,
    pub q_ratio: CheckReport,
    pub gap_bound: CheckReport,
    /// AsySVRG traces only.
    pub qhat_vs_q: Option<CheckReport>,
}

impl SimChecks {
    pub fn run(trace: &SimTrace, rho: f64) -> Result<Self> {
        Ok(SimChecks {
            rho,
            q_ratio: check_q_ratio(trace, rho)?,
            gap_bound: check_gap_bound(trace, rho)?,
            qhat_vs_q: if trace.config.is_asysvrg() {
                Some(check_qhat_vs_q(trace, rho)?)
            } else {
                None
            },
        })
    }

    pub fn all_hold(&self) -> bool {
        self.q_ratio.holds && self.gap_bound.holds && self.qhat_vs_q.is_none_or(|r| r.holds)
    }
}

pub fn write_report<W: Write>(out: W, cmdline: Option<&str>, trace: &SimTrace, rho: f64) -> Result<()> {
    let mut out = out;
    if let Some(line) = cmdline {
        writeln!(out, "# cmdline: {}", line.replace('\n', " ")).map_err(|e| Error::io("<report>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for (row, stats) in bound_rows(trace, rho).iter().zip(&trace.steps) {
        w.write_record([
            row.pos.t.to_string(),
            row.pos.outer.to_string(),
            row.pos.inner.to_string(),
            format_float(stats.delay.mean()),
            format_float(stats.dir_norm_sq.mean()),
            trace.trials.to_string(),
            format_float(row.q_hat),
            format_float(row.q_w),
            format_float(row.gap_sq),
            format_float(row.gap_bound),
            format_float(row.ratio),
            format_float(rho),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}
