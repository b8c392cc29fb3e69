//! Lock-free shared parameter store.
//!
//! Every cell is an `f64` stored in an `AtomicU64`, so individual loads and
//! stores are word-atomic and never tear. Nothing else is guaranteed: a
//! snapshot may mix values written by different workers, and
//! [`ParameterBlock::write_saxpy`] performs a plain load followed by a plain
//! store, so a concurrent writer's update to the same cell can be lost.
//! Those lost updates are the over-writes of the asynchronous analysis.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;
use crate::models::GradientBuffer;
use crate::vectors::{check_len, DenseVector};

pub struct ParameterBlock {
    cells: Vec<AtomicU64>,
}

impl ParameterBlock {
    pub fn new(len: usize) -> Self {
        ParameterBlock {
            cells: (0..len).map(|_| AtomicU64::new(0f64.to_bits())).collect(),
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        ParameterBlock {
            cells: values.iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn load(&self, k: usize) -> f64 {
        f64::from_bits(self.cells[k].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn store(&self, k: usize, v: f64) {
        self.cells[k].store(v.to_bits(), Ordering::Relaxed);
    }

    /// Cell-by-cell copy. Not a consistent snapshot under concurrent writes.
    pub fn read_snapshot(&self) -> DenseVector {
        self.cells
            .iter()
            .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
            .collect::<Vec<_>>()
            .into()
    }

    /// [`read_snapshot`](Self::read_snapshot) into an existing buffer.
    pub fn read_into(&self, out: &mut [f64]) -> Result<()> {
        check_len(self.len(), out.len())?;
        for (o, c) in out.iter_mut().zip(&self.cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
        Ok(())
    }

    /// `cell[k] <- cell[k] - step * g[k]` for every `k` in `g`'s support.
    ///
    /// The load and the store are separate operations, not an atomic
    /// read-modify-write.
    pub fn write_saxpy(&self, step: f64, g: &GradientBuffer) -> Result<()> {
        check_len(self.len(), g.len())?;
        let values = g.values();
        match g.support() {
            Some(support) => {
                for &k in support {
                    self.update_cell(k, step, values[k]);
                }
            }
            None => {
                for (k, &gk) in values.iter().enumerate() {
                    self.update_cell(k, step, gk);
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn update_cell(&self, k: usize, step: f64, gk: f64) {
        let cell = &self.cells[k];
        let old = f64::from_bits(cell.load(Ordering::Relaxed));
        cell.store((old - step * gk).to_bits(), Ordering::Relaxed);
    }

    /// Overwrites every cell. Callers must ensure no concurrent writers.
    pub fn store_all(&self, v: &[f64]) -> Result<()> {
        check_len(self.len(), v.len())?;
        for (c, x) in self.cells.iter().zip(v) {
            c.store(x.to_bits(), Ordering::Relaxed);
        }
        Ok(())
    }
}

impl core::fmt::Debug for ParameterBlock {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ParameterBlock").field("len", &self.len()).finish()
    }
}
