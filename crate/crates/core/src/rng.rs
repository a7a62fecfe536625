//! Counter-keyed random streams.
//!
//! Every random draw in a run comes from a stream addressed by
//! `(seed, client, round, purpose)`. The stream is a pure function of that
//! key, so results never depend on thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Participation = 1,
    Minibatch = 2,
    SyntheticData = 3,
    Sampling = 4,
}

/// Address of a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub client_id: u64,
    pub round: u64,
    pub purpose: Purpose,
}

impl RngStream {
    pub fn new(seed: u64, client_id: usize, round: usize, purpose: Purpose) -> Self {
        Self {
            seed,
            client_id: client_id as u64,
            round: round as u64,
            purpose,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.client_id.to_le_bytes());
        key[16..24].copy_from_slice(&self.round.to_le_bytes());
        key[24..32].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Shorthand for `RngStream::new(..).rng()`.
pub fn stream(seed: u64, client_id: usize, round: usize, purpose: Purpose) -> ChaCha8Rng {
    RngStream::new(seed, client_id, round, purpose).rng()
}
