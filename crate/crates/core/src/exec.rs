//! Data-parallel execution capability.
//!
//! Subsystems never spawn work on their own; callers pass an [`Exec`] value
//! that decides whether independent items (seeds, couplings, particles,
//! random samples) are mapped in parallel. Without the `parallel` feature
//! every variant runs sequentially. Results are always returned in input
//! order, and reductions that must be reproducible go through
//! [`Exec::chunked_sum`], whose summation tree does not depend on the number
//! of worker threads.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Fixed chunk length for reproducible reductions.
pub const REDUCTION_CHUNK: usize = 512;

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f(index, &mut item)` over a mutable slice, in input order.
    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter_mut().enumerate().map(|(i, x)| f(i, x)).collect();
        }
        items.iter_mut().enumerate().map(|(i, x)| f(i, x)).collect()
    }

    /// Applies `f(global_index, &mut item)` to every element.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            items
                .par_chunks_mut(REDUCTION_CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    let base = c * REDUCTION_CHUNK;
                    for (i, x) in chunk.iter_mut().enumerate() {
                        f(base + i, x);
                    }
                });
            return;
        }
        for (i, x) in items.iter_mut().enumerate() {
            f(i, x);
        }
    }

    /// Sums per-chunk partial results in chunk order. `partial` receives the
    /// chunk's starting index and slice and returns a vector of length `len`.
    pub fn chunked_sum<T, F>(self, items: &[T], len: usize, partial: F) -> Vec<f64>
    where
        T: Sync,
        F: Fn(usize, &[T]) -> Vec<f64> + Sync + Send,
    {
        let starts: Vec<usize> = (0..items.len()).step_by(REDUCTION_CHUNK).collect();
        let parts = self.map(&starts, |&s| {
            let e = (s + REDUCTION_CHUNK).min(items.len());
            partial(s, &items[s..e])
        });
        let mut acc = vec![0.0; len];
        for p in parts {
            debug_assert_eq!(p.len(), len);
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_identical_across_modes() {
        let xs: Vec<f64> = (0..5000).map(|i| ((i as f64) * 0.37).sin()).collect();
        let f = |_s: usize, c: &[f64]| vec![c.iter().sum::<f64>(), c.iter().map(|x| x * x).sum()];
        let a = Exec::Sequential.chunked_sum(&xs, 2, f);
        let b = Exec::Parallel.chunked_sum(&xs, 2, f);
        assert_eq!(a, b);
    }

    #[test]
    fn map_preserves_order() {
        let v = Exec::Parallel.map_range(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
