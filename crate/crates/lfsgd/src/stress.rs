//! Concurrency checks for the shared parameter store.

use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use lfsgd_core::{GradientBuffer, ModelSpec, ParameterBlock, SparseVector};

/// Two bit patterns whose halves differ, so a torn 64-bit cell shows up as a
/// third pattern.
pub const SENTINEL_A: u64 = 0x5555_5555_5555_5555;
pub const SENTINEL_B: u64 = 0xAAAA_AAAA_AAAA_AAAA;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentinelReport {
    pub writes: u64,
    pub cell_reads: u64,
    pub torn: u64,
}

/// `writers` threads store the two sentinels into `cells` cells,
/// `ops_per_writer` stores each, while `readers` threads snapshot the block
/// until the writers are finished and they have read at least
/// `min_reads_per_reader` cells; every cell read is classified.
pub fn two_sentinel(
    writers: usize,
    readers: usize,
    ops_per_writer: usize,
    min_reads_per_reader: u64,
    cells: usize,
) -> SentinelReport {
    let block = ParameterBlock::from_values(&vec![f64::from_bits(SENTINEL_A); cells]);
    let done = AtomicBool::new(false);
    let (block, done) = (&block, &done);
    thread::scope(|s| {
        let writer_handles: Vec<_> = (0..writers)
            .map(|w| {
                s.spawn(move || {
                    for k in 0..ops_per_writer {
                        let bits = if (k + w) % 2 == 0 { SENTINEL_B } else { SENTINEL_A };
                        block.store((k * 7 + w) % cells, f64::from_bits(bits));
                    }
                })
            })
            .collect();
        let reader_handles: Vec<_> = (0..readers)
            .map(|_| {
                s.spawn(move || {
                    let mut snap = vec![0.0; cells];
                    let (mut reads, mut torn) = (0u64, 0u64);
                    loop {
                        let last = done.load(Ordering::Acquire);
                        block.read_into(&mut snap).expect("length matches");
                        for v in &snap {
                            let b = v.to_bits();
                            reads += 1;
                            torn += u64::from(b != SENTINEL_A && b != SENTINEL_B);
                        }
                        if last && reads >= min_reads_per_reader {
                            return (reads, torn);
                        }
                    }
                })
            })
            .collect();
        for h in writer_handles {
            h.join().expect("writer panicked");
        }
        done.store(true, Ordering::Release);
        let (cell_reads, torn) = reader_handles
            .into_iter()
            .map(|h| h.join().expect("reader panicked"))
            .fold((0, 0), |(r, t), (a, b)| (r + a, t + b));
        SentinelReport {
            writes: (writers * ops_per_writer) as u64,
            cell_reads,
            torn,
        }
    })
}

/// `threads` workers each add 1.0 to cell 0 `per_thread` times through the
/// non-atomic read-modify-write; returns the final cell value. Lost updates
/// make it anything in `[1, threads * per_thread]`.
pub fn racing_increments(threads: usize, per_thread: usize) -> f64 {
    let block = ParameterBlock::new(1);
    let minus_one = GradientBuffer::from_dense(vec![-1.0].into());
    thread::scope(|s| {
        for _ in 0..threads {
            let (block, g) = (&block, &minus_one);
            s.spawn(move || {
                for _ in 0..per_thread {
                    block.write_saxpy(1.0, g).expect("length matches");
                }
            });
        }
    });
    block.load(0)
}

/// Worker `w` repeatedly writes sparse gradients supported on cells
/// `3w` and `3w + 1`; every third cell is a sentinel no gradient touches.
/// Returns the number of sentinel cells whose bits changed.
pub fn support_locality(threads: usize, steps_per_thread: usize) -> usize {
    let dim = 3 * threads;
    let sentinel = f64::from_bits(SENTINEL_B);
    let init: Vec<f64> = (0..dim).map(|k| if k % 3 == 2 { sentinel } else { 0.0 }).collect();
    let block = ParameterBlock::from_values(&init);
    let spec = ModelSpec::logreg(dim, 0.0).expect("valid model");
    thread::scope(|s| {
        for w in 0..threads {
            let (block, spec) = (&block, &spec);
            s.spawn(move || {
                let x = SparseVector::new(dim, vec![3 * w, 3 * w + 1], vec![1.0, -0.5]).expect("sorted");
                let mut g = GradientBuffer::new(dim);
                let mut snap = vec![0.0; dim];
                for k in 0..steps_per_thread {
                    block.read_into(&mut snap).expect("length matches");
                    // zero the sentinels in the query: only the support matters for the loss
                    for c in (2..dim).step_by(3) {
                        snap[c] = 0.0;
                    }
                    spec.grad_single(&snap, &x, k % 2, &mut g).expect("finite inputs");
                    block.write_saxpy(0.01, &g).expect("length matches");
                }
            });
        }
    });
    (2..dim)
        .step_by(3)
        .filter(|&c| block.load(c).to_bits() != SENTINEL_B)
        .count()
}
