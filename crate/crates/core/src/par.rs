//! Thin dispatch layer between rayon and sequential execution.
//!
//! Results are collected in index order, so the output is independent of
//! thread scheduling and identical across the `parallel` and sequential
//! builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Maps `f` over fixed-size chunks of `items`, in chunk order.
///
/// Chunk boundaries depend only on `chunk` and `items.len()`, never on the
/// thread count, so any per-chunk accumulation stays deterministic.
#[cfg(feature = "parallel")]
pub(crate) fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&[T]) -> U + Sync + Send,
{
    items.par_chunks(chunk).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
where
    F: Fn(&[T]) -> U,
{
    items.chunks(chunk).map(f).collect()
}
