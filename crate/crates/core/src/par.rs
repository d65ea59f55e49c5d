//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) work is spread over the rayon
//! global pool. Without it the same functions run on the calling thread.
//! Reductions split the index range into fixed-size chunks and combine the
//! chunk results in index order, so the floating-point result does not depend
//! on the thread count or on whether the feature is enabled.

use std::ops::Range;

/// Number of items reduced sequentially inside one chunk.
pub const CHUNK: usize = 128;

fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}

/// Evaluates `f` on consecutive chunks of `0..n` and folds the chunk results
/// left to right with `combine`, starting from `init`.
pub fn chunked_fold<T, F, C>(n: usize, init: T, f: F, combine: C) -> T
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
    C: FnMut(T, T) -> T,
{
    let ranges = chunk_ranges(n, CHUNK);
    map_slice(&ranges, |r| f(r.clone()))
        .into_iter()
        .fold(init, combine)
}

/// Sums `f(i)` over `0..n` with a thread-count independent summation order.
pub fn sum(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    chunked_fold(n, 0.0, |r| r.map(&f).sum::<f64>(), |a, b| a + b)
}

/// Element-wise sum of per-chunk vectors of length `len`.
pub fn sum_vectors<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync + Send,
{
    chunked_fold(
        n,
        vec![0.0; len],
        |r| {
            let mut acc = vec![0.0; len];
            f(r, &mut acc);
            acc
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        },
    )
}

/// Derives an independent 64-bit seed from a base seed and a stream path,
/// using the SplitMix64 finalizer.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut z = base ^ 0x9E37_79B9_7F4A_7C15;
    for &s in stream {
        z = z.wrapping_add(s.wrapping_mul(0xBF58_476D_1CE4_E5B9)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
