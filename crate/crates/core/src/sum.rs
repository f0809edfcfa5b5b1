//! Deterministic floating-point accumulation.
//!
//! Every reduction in the crate goes through [`NeumaierSum`] in a fixed
//! traversal order. Parallel reductions split the index range into chunks of
//! a fixed size (independent of the thread count), reduce each chunk
//! sequentially and then fold the partials in chunk order, so results are
//! bit-identical for any number of worker threads.

use rayon::prelude::*;

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(values);
    acc.value()
}

/// Chunk length used by [`chunked_sum`]. Part of the reproducibility contract:
/// changing it changes low-order bits of every grid estimate.
pub const REDUCTION_CHUNK: usize = 4096;

/// Sums `term(i)` for `i in 0..len` with a fixed chunked tree order.
pub fn chunked_sum<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(REDUCTION_CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCTION_CHUNK;
            let hi = (lo + REDUCTION_CHUNK).min(len);
            let mut acc = NeumaierSum::new();
            for i in lo..hi {
                acc.add(term(i));
            }
            acc.value()
        })
        .collect();
    compensated_sum(partials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_cancelled_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn chunked_matches_across_thread_counts() {
        let term = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| chunked_sum(100_000, term));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| chunked_sum(100_000, term));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(chunked_sum(0, |_| 1.0), 0.0);
        assert_eq!(compensated_sum(std::iter::empty()), 0.0);
    }
}
