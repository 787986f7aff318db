//! Seeded randomness.
//!
//! Every routine that needs random numbers takes a [`RandomSource`]
//! explicitly. A single experiment seed is split into independent
//! substreams (see [`Stream`]) so that e.g. the initialisation can be varied
//! without perturbing the training batches.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Purpose-specific substreams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Target = 1,
    Init = 2,
    Batches = 3,
    Noise = 4,
    Replacement = 5,
    Auxiliary = 6,
}

#[derive(Clone, Debug)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for `purpose` under `seed`.
    pub fn substream(seed: u64, purpose: Stream) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(purpose as u64);
        Self { rng }
    }

    /// Standard normal sample.
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn gaussian_vector(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.gaussian())
    }

    /// Uniform sample from the unit sphere in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> DVector<f64> {
        loop {
            let v = self.gaussian_vector(dim);
            let norm = v.norm();
            if norm > 1e-14 {
                return v / norm;
            }
        }
    }

    /// Uniform `size`-subset of `0..n`, sorted ascending.
    pub fn subset(&mut self, n: usize, size: usize) -> Vec<usize> {
        let mut idx = rand::seq::index::sample(&mut self.rng, n, size).into_vec();
        idx.sort_unstable();
        idx
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Uniform float in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Child source seeded from this stream.
    pub fn fork(&mut self) -> Self {
        Self::seed_from_u64(self.rng.random())
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
