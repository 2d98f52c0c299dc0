//! Deterministic parallel reduction.
//!
//! Work is split into fixed-size chunks; each chunk is reduced sequentially
//! and the per-chunk partials are combined in chunk order with compensated
//! summation. The result is bit-identical for any number of worker threads.

use rayon::prelude::*;

/// Fixed chunk length for all parallel reductions.
pub const CHUNK: usize = 4096;

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum `f(i)` for `i in 0..n`, deterministically, in parallel over chunks.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = Kahan::default();
            for i in lo..hi {
                acc.add(f(i));
            }
            acc.value()
        })
        .collect();
    let mut total = Kahan::default();
    for p in partials {
        total.add(p);
    }
    total.value()
}

/// Map each chunk to a partial with `map`, then fold the partials in chunk
/// order. `map` receives the chunk's index range.
pub fn par_chunks<T, M>(n: usize, map: M) -> Vec<T>
where
    T: Send,
    M: Fn(std::ops::Range<usize>) -> T + Sync,
{
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            map(lo..hi)
        })
        .collect()
}
