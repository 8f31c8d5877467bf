//! Seeded generator shared by the randomized suites.

use nalgebra::DVector;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ChaCha8 stream; identical seeds give identical draws on every platform.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seed(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[-1, 1)`.
    pub fn uniform(&mut self) -> f64 {
        2.0 * self.0.random::<f64>() - 1.0
    }

    pub fn uniform_vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.uniform())
    }

    /// Independent stream for job `index`, so parallel work stays reproducible.
    pub fn fork(&self, index: u64) -> Self {
        let mut child = self.0.clone();
        child.set_stream(index.wrapping_add(1));
        Rng(child)
    }
}
