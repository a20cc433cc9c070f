//! Data-parallel primitives with a sequential fallback.
//!
//! The solvers are written against these helpers so that the crate builds
//! with or without the `parallel` feature (rayon). Reductions use fixed
//! chunk boundaries: the rounding of a floating-point sum then depends only
//! on the data, not on thread scheduling, which keeps solver output
//! byte-identical across runs.

/// Chunk length for deterministic reductions.
const CHUNK: usize = 4096;

/// Maps `0..n` through `f`, in parallel when enabled.
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

/// In-place elementwise update `data[i] = f(i, data[i])`.
pub fn update_in_place<T, F>(data: &mut [T], f: F)
where
    T: Send + Copy,
    F: Fn(usize, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = f(i, *v));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in data.iter_mut().enumerate() {
            *v = f(i, *v);
        }
    }
}

fn chunk_sums<F>(n: usize, term: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partial = |&s: &usize| -> f64 {
        let end = (s + CHUNK).min(n);
        let mut acc = 0.0;
        for i in s..end {
            acc += term(i);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        starts.par_iter().map(partial).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        starts.iter().map(partial).collect()
    }
}

/// Deterministic sum of `term(i)` over `0..n`.
pub fn sum_indexed<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunk_sums(n, term).iter().sum()
}

/// Deterministic dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |i| a[i] * b[i])
}

/// Number of worker threads the parallel build would use (1 otherwise).
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_sequential_reference() {
        let a: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.3).cos()).collect();
        let chunked = dot(&a, &b);
        // Same chunking applied sequentially must agree bit-for-bit.
        let mut partials = Vec::new();
        for s in (0..a.len()).step_by(4096) {
            let e = (s + 4096).min(a.len());
            let mut acc = 0.0;
            for i in s..e {
                acc += a[i] * b[i];
            }
            partials.push(acc);
        }
        let reference: f64 = partials.iter().sum();
        assert_eq!(chunked.to_bits(), reference.to_bits());
    }

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(100, |i| i * 2);
        assert_eq!(v[7], 14);
        assert_eq!(v.len(), 100);
    }
}
