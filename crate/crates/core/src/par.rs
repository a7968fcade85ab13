//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces results in index order, so outputs do not depend on
//! the number of worker threads. Floating-point reductions are split into
//! fixed-size chunks whose partial sums are combined sequentially.

use serde::{Deserialize, Serialize};

/// How independent work items are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, and runs
    /// sequentially otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Caps the global worker pool. Has no effect without the `parallel`
/// feature or once the pool has started.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Fixed chunk length for deterministic reductions.
pub const CHUNK: usize = 512;

pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn for_each_mut<T, F>(exec: Execution, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = exec;
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Sums `f(range)` over consecutive chunks of `0..len`; the partial sums are
/// added in chunk order so the result is bit-identical for any thread count.
pub fn chunked_sum<F>(exec: Execution, len: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    if chunks <= 1 {
        return f(0..len);
    }
    let parts = map_range(exec, chunks, |c| f(c * CHUNK..((c + 1) * CHUNK).min(len)));
    parts.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_identical_across_modes() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.37).sin()).collect();
        let f = |r: std::ops::Range<usize>| xs[r].iter().sum::<f64>();
        let a = chunked_sum(Execution::Sequential, xs.len(), f);
        let b = chunked_sum(Execution::Parallel, xs.len(), f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(Execution::Parallel, 1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
