//! Execution strategy for the data-parallel kernels.
//!
//! With the `parallel` feature, [`Exec::Parallel`] runs row kernels on the
//! rayon pool; without it, both variants run sequentially. Results are
//! bit-identical either way because each row is written by exactly one job.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Rows shorter than this stay sequential; spawning costs more than it saves.
const MIN_PARALLEL_WORK: usize = 1 << 14;

impl Exec {
    /// Run `job(row_index, row)` over consecutive chunks of `data`.
    pub fn for_each_chunk<F>(self, data: &mut [u64], chunk: usize, job: F)
    where
        F: Fn(usize, &mut [u64]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && data.len() >= MIN_PARALLEL_WORK {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk).enumerate().for_each(|(i, row)| job(i, row));
            return;
        }
        let _ = MIN_PARALLEL_WORK;
        for (i, row) in data.chunks_mut(chunk).enumerate() {
            job(i, row);
        }
    }

    /// Run two independent jobs.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return rayon::join(a, b);
        }
        (a(), b())
    }

    /// Map over indices, preserving order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}
