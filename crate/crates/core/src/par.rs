//! Data-parallel helpers. With the `parallel` feature the loops run on the
//! rayon pool; without it they fall back to plain sequential iterators.
//!
//! Every helper writes each output cell from a single closure call, so the
//! floating-point result does not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fills `out[i] = f(i)` for every index.
pub(crate) fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
}

/// Calls `f(chunk_index, chunk)` for consecutive chunks of length `len`.
pub(crate) fn for_each_chunk<F>(out: &mut [f64], len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Collects `f(0), f(1), ..., f(n - 1)` in index order.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// True when the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
