//! Data-parallel fan-out with a sequential fallback.
//!
//! `map_indexed` dispatches to rayon when the `parallel` feature is on
//! and to a plain loop otherwise. Both preserve index order, so every
//! caller produces bit-identical results regardless of feature or thread
//! count; reductions over the results must stay sequential for the same
//! reason.

/// Ordered map over 0..n, parallel when the feature allows.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n).map(f).collect()
}

/// Always-sequential variant; the reference path for benches and for the
/// parity tests against `map_indexed`.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Caps the global worker pool. A no-op without the `parallel` feature or
/// if a pool was already installed.
pub fn configure_thread_pool(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_elementwise() {
        let f = |i: usize| (i as f64).sin() * (i as f64 + 1.0);
        let a = map_indexed(257, f);
        let b = map_indexed_seq(257, f);
        assert_eq!(a, b);
    }
}
