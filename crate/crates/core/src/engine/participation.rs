use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Each client joins a round independently with a fixed probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipationPolicy {
    probability: f64,
    seed: u64,
}

impl ParticipationPolicy {
    pub fn new(probability: f64, seed: u64) -> Result<Self> {
        if !(probability > 0.0 && probability <= 1.0) {
            return Err(Error::Config(format!(
                "participation must be in (0, 1], got {probability}"
            )));
        }
        Ok(Self { probability, seed })
    }

    pub fn full() -> Self {
        Self {
            probability: 1.0,
            seed: 0,
        }
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn is_full(&self) -> bool {
        self.probability >= 1.0
    }

    /// Full participation consumes no randomness.
    pub fn is_active(&self, client: usize, round: usize) -> bool {
        self.is_full()
            || stream(self.seed, client, round, Purpose::Participation).random::<f64>()
                < self.probability
    }

    pub fn active_set(&self, n: usize, round: usize) -> Vec<bool> {
        (0..n).map(|i| self.is_active(i, round)).collect()
    }
}
