//! Reproducible random streams.
//!
//! Every draw comes from ChaCha20 (20 rounds) keyed by a 64-bit seed through
//! `SeedableRng::seed_from_u64`, with the instance index as the ChaCha stream
//! id. Uniforms are `(next_u64 >> 11)·2⁻⁵³` in `[0, 1)`; normals use the
//! Box–Muller transform on `(1 − u₁, u₂)`, returning the cosine branch first
//! and the sine branch on the next call.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Stream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform index in `0..n` (`n > 0`), by scaling a uniform.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// `k` distinct indices from `0..n` by a partial Fisher–Yates shuffle.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = i + self.index(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k.min(n));
        idx
    }
}
