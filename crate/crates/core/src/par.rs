//! Thin switch between rayon and sequential iteration.
//!
//! Callers only ever map over an index range and collect into a `Vec`, which
//! preserves order under both backends. Reductions are then folded
//! sequentially by the caller, so the floating-point result does not depend
//! on the backend or the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

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

/// Applies `f(row_index, row)` to every `width`-sized chunk of `data`.
pub(crate) fn for_each_row_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Order-fixed sum of per-row partials.
pub(crate) fn ordered_sum(parts: &[f64]) -> f64 {
    parts.iter().fold(0.0, |acc, &x| acc + x)
}

/// Reports whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
