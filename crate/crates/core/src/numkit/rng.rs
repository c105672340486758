use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numkit::{Matrix, Scalar};

/// Seeded, platform-independent random stream.
///
/// Floats are produced from the top 53 bits of a ChaCha8 word, so the same
/// seed yields the same sequence on every target.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, keyed by `tag`.
    pub fn fork(&self, tag: u64) -> SeededRng {
        let mixed =
            self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        SeededRng::new(mixed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        // Rejection sampling avoids modulo bias.
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Matrix with i.i.d. entries uniform in `[-scale, scale]`.
///
/// Draws happen in `f64` and are then cast, so `f32` and `f64` matrices built
/// from the same stream agree up to rounding.
pub fn init_uniform<T: Scalar>(rows: usize, cols: usize, scale: f64, rng: &mut SeededRng) -> Matrix<T> {
    assert!(scale > 0.0, "init_uniform: scale must be positive");
    let data = (0..rows * cols).map(|_| T::lit(rng.uniform(-scale, scale))).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a: Matrix<f32> = init_uniform(20, 30, 0.05, &mut SeededRng::new(7));
        let b: Matrix<f32> = init_uniform(20, 30, 0.05, &mut SeededRng::new(7));
        assert_eq!(a.data(), b.data());
        let c: Matrix<f32> = init_uniform(20, 30, 0.05, &mut SeededRng::new(8));
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn entries_in_range_and_centered() {
        let m: Matrix<f64> = init_uniform(1000, 100, 0.05, &mut SeededRng::new(1));
        assert!(m.data().iter().all(|x| x.abs() <= 0.05));
        let mean = m.data().iter().sum::<f64>() / m.data().len() as f64;
        // sd of the mean = 0.05 / sqrt(3 * 1e5) ≈ 9e-5
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn known_first_draws_are_stable() {
        let mut rng = SeededRng::new(42);
        assert_eq!(rng.next_u64(), 0xae90_bfb5_395d_5ba1);
        assert_eq!(rng.next_u64(), 0xf345_3fc6_2579_9188);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<usize> = (0..100).collect();
        SeededRng::new(3).shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    fn forks_differ() {
        let base = SeededRng::new(5);
        assert_ne!(base.fork(1).next_u64(), base.fork(2).next_u64());
    }
}
