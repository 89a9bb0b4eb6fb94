//! Counter-based scenario streams.
//!
//! Every scenario owns an independent ChaCha8 stream selected by
//! `(seed, scenario index, purpose)`, so the draws of a scenario never depend
//! on how many other scenarios are generated or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Sub-stream tags. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Example21 = 1,
    Brownian = 2,
    Controls = 3,
    Restarts = 4,
    Proptest = 5,
}

#[derive(Debug, Clone)]
pub struct ScenarioRng {
    inner: ChaCha8Rng,
}

impl ScenarioRng {
    pub fn new(seed: u64, scenario: u64, purpose: Purpose) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(b"bondint!");
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(scenario);
        Self { inner }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Exponential with the given mean, by inverse CDF.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.uniform()).ln()
    }

    pub fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}
