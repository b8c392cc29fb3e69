//! Numerical core for lock-free parallel SGD and SVRG.
//!
//! Everything here is `no_std` + `alloc`: sparse data and the LIBSVM text
//! format, the loss families, the atomic shared parameter store,
//! convergence-theory calculators, and a deterministic simulator of
//! asynchronous delayed / overwritten updates. Threads, clocks and files
//! live in the `lfsgd` crate.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod estimator;
pub mod libsvm;
pub mod math;
pub mod models;
pub mod sampling;
pub mod shared;
pub mod sim;
pub mod synth;
pub mod theory;
pub mod vectors;

pub use error::{Error, Result};
pub use models::{GradientBuffer, ModelKind, ModelSpec, ParameterLayout};
pub use shared::ParameterBlock;
pub use vectors::{Dataset, DenseVector, SparseVector};
