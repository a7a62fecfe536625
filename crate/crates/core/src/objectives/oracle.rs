use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng::{stream, Purpose};

use super::ClientObjective;

/// Minibatch gradients drawn with replacement from per-(client, round) streams.
///
/// A batch at least as large as the client's dataset yields the exact full
/// gradient with no random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StochasticOracle {
    pub batch_size: usize,
    pub seed: u64,
}

impl StochasticOracle {
    pub fn new(batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(Self { batch_size, seed })
    }

    pub fn is_full_batch(&self, client: &ClientObjective) -> bool {
        self.batch_size >= client.sample_count()
    }

    pub fn stochastic_grad(
        &self,
        client: &ClientObjective,
        client_id: usize,
        x: &[f64],
        round: usize,
    ) -> Result<Vector> {
        let m = client.sample_count();
        if m == 0 {
            return Err(Error::EmptyDataset(format!(
                "client {client_id} has no samples"
            )));
        }
        if self.is_full_batch(client) {
            return Ok(client.grad(x));
        }
        let mut rng = stream(self.seed, client_id, round, Purpose::Minibatch);
        let rows: Vec<usize> = (0..self.batch_size)
            .map(|_| rng.random_range(0..m))
            .collect();
        Ok(client.minibatch_grad(x, &rows))
    }
}
