//! Seeded synthetic data generation.
//!
//! Perception front-ends (image encoders, depth sensors) are out of scope;
//! synthetic features and depths stand in for them. All sampling flows through
//! [`SyntheticRng`], a thin wrapper over ChaCha8 that maps raw 64-bit output to
//! uniform doubles directly, so every artifact derived from a seed is
//! reproducible run-to-run and across platforms.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;
use crate::scene::Vec3;

/// Deterministic uniform generator over a ChaCha8 stream.
pub struct SyntheticRng {
    rng: ChaCha8Rng,
}

impl SyntheticRng {
    #[must_use]
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits of one `u64`.
    pub fn unit(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.rng.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer draw in `[0, n)` by rejection-free scaling; `n` must be
    /// small relative to 2^53 (always true at desk scale).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index draw over empty range");
        let i = (self.unit() * n as f64) as usize;
        i.min(n - 1)
    }

    /// Matrix with i.i.d. uniform entries in `[lo, hi)`, row-major draw order.
    pub fn mat(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Mat {
        Mat::from_fn(rows, cols, |_, _| self.uniform(lo, hi))
    }

    /// Vector with i.i.d. uniform entries in `[lo, hi)`.
    pub fn vec(&mut self, len: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(lo, hi)).collect()
    }

    /// Point with each coordinate uniform in `[lo, hi)`.
    pub fn point(&mut self, lo: f64, hi: f64) -> Vec3 {
        Vec3::new(
            self.uniform(lo, hi),
            self.uniform(lo, hi),
            self.uniform(lo, hi),
        )
    }

    /// Points with each coordinate uniform in `[lo, hi)`.
    pub fn points(&mut self, n: usize, lo: f64, hi: f64) -> Vec<Vec3> {
        (0..n).map(|_| self.point(lo, hi)).collect()
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}
