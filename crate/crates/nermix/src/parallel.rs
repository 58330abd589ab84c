//! Data-parallel map with a sequential fallback.
//!
//! Chains and simulation replicates are independent work units seeded by
//! their own index, so the output is bit-identical whether the closure runs
//! on one thread or many. Compiling without the `parallel` feature removes
//! the rayon dependency entirely.

/// Apply `f` to `0..count`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

/// Apply `f` to `0..count`, preserving index order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Whether this build runs work units on a rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
