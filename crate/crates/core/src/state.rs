//! Per-client slots and the federation state shared by all algorithms.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist_sq, mean, Vector};

/// Everything a client keeps between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSlot {
    /// Local model `x_i`.
    pub x: Vector,
    /// Accumulated dual variable (augmented-Lagrangian variant only).
    pub y: Vector,
    /// Averaged gradient estimator (stochastic variant only).
    pub d: Vector,
    /// Index into the federation's per-client feasible sets.
    pub set_id: usize,
}

impl ClientSlot {
    pub fn new(x: Vector, set_id: usize) -> Self {
        let dim = x.dim();
        Self {
            x,
            y: Vector::zeros(dim),
            d: Vector::zeros(dim),
            set_id,
        }
    }
}

/// Client models (the columns of `X`), the server average, and the round counter.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationState {
    pub clients: Vec<ClientSlot>,
    /// Server average `x̄`, maintained as the exact mean of the client models.
    pub x_bar: Vector,
    /// The next round to execute (starts at 1).
    pub round: usize,
}

impl FederationState {
    /// All clients start from the same point `x0`, so `X^1` lies in the consensus set.
    pub fn uniform(n: usize, x0: Vector) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "a federation needs at least one client".into(),
            ));
        }
        let clients = (0..n).map(|i| ClientSlot::new(x0.clone(), i)).collect();
        Ok(Self {
            clients,
            x_bar: x0,
            round: 1,
        })
    }

    /// Builds a state from arbitrary client models; `x_bar` is their mean.
    pub fn from_models(models: Vec<Vector>) -> Result<Self> {
        let first = models
            .first()
            .ok_or_else(|| Error::Config("a federation needs at least one client".into()))?;
        let dim = first.dim();
        for m in &models {
            check_dim(dim, m.dim())?;
        }
        let clients: Vec<_> = models
            .into_iter()
            .enumerate()
            .map(|(i, x)| ClientSlot::new(x, i))
            .collect();
        let x_bar = mean(clients.iter().map(|c| c.x.as_slice()), dim);
        Ok(Self {
            clients,
            x_bar,
            round: 1,
        })
    }

    pub fn n(&self) -> usize {
        self.clients.len()
    }

    pub fn dim(&self) -> usize {
        self.x_bar.dim()
    }

    /// Exact mean of the client models, recomputed in client order.
    pub fn model_mean(&self) -> Vector {
        mean(self.clients.iter().map(|c| c.x.as_slice()), self.dim())
    }
}

/// `dist(X, C) = ||X - x̄ 1ᵀ||_F`, with `x̄` recomputed from the client models.
pub fn consensus_distance(state: &FederationState) -> f64 {
    let centre = state.model_mean();
    state
        .clients
        .iter()
        .map(|c| dist_sq(&c.x, &centre))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(models: &[&[f64]]) -> FederationState {
        FederationState::from_models(models.iter().map(|m| Vector::from(m.to_vec())).collect())
            .unwrap()
    }

    #[test]
    fn consensus_distance_examples() {
        assert!((consensus_distance(&state(&[&[1.0], &[-1.0]])) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            consensus_distance(&state(&[&[0.5, 2.0], &[0.5, 2.0], &[0.5, 2.0]])),
            0.0
        );
        // mean (1, 0); offsets (+-2, 0)
        let brute: f64 = [(3.0f64 - 1.0).powi(2), (-1.0f64 - 1.0).powi(2)]
            .iter()
            .sum::<f64>()
            .sqrt();
        assert!((consensus_distance(&state(&[&[3.0, 0.0], &[-1.0, 0.0]])) - brute).abs() < 1e-15);
        assert!((brute - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn consensus_distance_ignores_cached_average() {
        let mut s = state(&[&[1.0], &[-1.0]]);
        s.x_bar = Vector::from(vec![100.0]);
        assert!((consensus_distance(&s) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_federation_rejected() {
        assert!(FederationState::uniform(0, Vector::zeros(2)).is_err());
        assert!(FederationState::from_models(vec![]).is_err());
        assert!(FederationState::from_models(vec![Vector::zeros(2), Vector::zeros(3)]).is_err());
    }

    proptest! {
        #[test]
        fn distance_zero_iff_consensus(
            base in proptest::collection::vec(-5.0f64..5.0, 3),
            offsets in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..5),
            equal in any::<bool>(),
        ) {
            let models: Vec<Vector> = offsets
                .iter()
                .map(|o| base.iter().zip(o).map(|(b, d)| if equal { *b } else { b + d }).collect())
                .collect();
            let all_equal = models.windows(2).all(|w| w[0] == w[1]);
            let d = consensus_distance(&FederationState::from_models(models).unwrap());
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d <= 1e-12, all_equal);
        }
    }
}
