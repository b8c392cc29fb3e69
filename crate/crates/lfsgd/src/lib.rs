//! Multi-threaded lock-free training on top of [`lfsgd_core`]: sequential
//! SGD and SVRG, Hogwild! and AsySVRG over a shared [`ParameterBlock`],
//! the metrics CSV, CPU-time normalization, dataset loading, and the pieces
//! behind the `lfsgd` command line.
//!
//! [`ParameterBlock`]: lfsgd_core::ParameterBlock

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod simulate;
pub mod stress;
pub mod timing;

pub use error::{Error, Result};
pub use lfsgd_core;
pub use optim::{run, run_asysvrg, run_hogwild, run_sgd, run_svrg, Algo, Count, RunConfig, RunMetrics};
