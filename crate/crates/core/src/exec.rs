//! Row-parallel execution helpers.
//!
//! Work is split into fixed-size chunks and partial results are combined in
//! chunk order, so the sequential and parallel paths return bit-identical
//! floating point results regardless of the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows handled per task.
pub const CHUNK: usize = 512;

/// Execution strategy for data-parallel loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled and falls
    /// back to sequential execution otherwise.
    Parallel,
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

impl Exec {
    /// Whether this strategy actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `Σ_{i<n} f(i)` with a fixed chunked summation order.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunk_sum = |c: usize| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        };
        let chunks = n.div_ceil(CHUNK);
        self.map(chunks, chunk_sum).into_iter().sum()
    }

    /// `[f(0), ..., f(n-1)]`, order preserved.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && n > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_between_strategies() {
        let f = |i: usize| (i as f64).sqrt().sin() * 1e3 + 1e-7 * i as f64;
        let n = 10 * CHUNK + 17;
        let a = Exec::Sequential.sum(n, f);
        let b = Exec::Parallel.sum(n, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let v = Exec::Parallel.map(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        assert_eq!(Exec::Sequential.sum(0, |_| 1.0), 0.0);
    }
}
