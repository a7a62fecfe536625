//! Client objectives and the finite sum `F = (1/n) Σ f_i`.

mod dataset;
pub(crate) mod mclr;
mod oracle;
mod quadratic;
mod synthetic;

pub use dataset::Dataset;
pub use mclr::{MclrClient, SmoothnessEstimate};
pub use oracle::StochasticOracle;
pub use quadratic::QuadraticClient;
pub use synthetic::{generate_synthetic, Heterogeneity, Labeller, SyntheticSpec};

use crate::error::{Error, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq)]
pub enum ClientObjective {
    Quadratic(QuadraticClient),
    Mclr(MclrClient),
}

impl ClientObjective {
    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic(q) => q.dim(),
            Self::Mclr(m) => m.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Quadratic(q) => q.value(x),
            Self::Mclr(m) => m.value(x),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vector {
        match self {
            Self::Quadratic(q) => q.grad(x),
            Self::Mclr(m) => m.grad(x),
        }
    }

    /// A quadratic client is a single sample.
    pub fn sample_count(&self) -> usize {
        match self {
            Self::Quadratic(_) => 1,
            Self::Mclr(m) => m.sample_count(),
        }
    }

    pub fn minibatch_grad(&self, x: &[f64], rows: &[usize]) -> Vector {
        match self {
            Self::Quadratic(q) => q.grad(x),
            Self::Mclr(m) => m.minibatch_grad(x, rows),
        }
    }

    pub fn smoothness(&self) -> SmoothnessEstimate {
        match self {
            Self::Quadratic(q) => SmoothnessEstimate {
                value: q.smoothness(),
                converged: true,
            },
            Self::Mclr(m) => m.smoothness(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Self::Quadratic(q) => q.is_convex(),
            Self::Mclr(_) => true,
        }
    }
}

impl From<QuadraticClient> for ClientObjective {
    fn from(q: QuadraticClient) -> Self {
        Self::Quadratic(q)
    }
}

impl From<MclrClient> for ClientObjective {
    fn from(m: MclrClient) -> Self {
        Self::Mclr(m)
    }
}

/// `F(x) = (1/n) Σ_i f_i(x)` over a fixed list of clients sharing one model layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    clients: Vec<ClientObjective>,
    dim: usize,
}

impl Problem {
    pub fn new(clients: Vec<ClientObjective>) -> Result<Self> {
        let first = clients
            .first()
            .ok_or_else(|| Error::InvalidObjective("a problem needs at least one client".into()))?;
        let dim = first.dim();
        if let Some(bad) = clients.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self { clients, dim })
    }

    /// Two clients `(x-3)²` and `(x+1)²`: the averaged-LMO baseline stalls at 0
    /// although the minimizer over `[-1, 1]` is 1.
    pub fn counterexample() -> Self {
        let q = |a: f64| {
            QuadraticClient::new(Vector::from(vec![a]), 1.0)
                .expect("valid client")
                .into()
        };
        Self::new(vec![q(3.0), q(-1.0)]).expect("valid problem")
    }

    pub fn n(&self) -> usize {
        self.clients.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clients(&self) -> &[ClientObjective] {
        &self.clients
    }

    pub fn client(&self, i: usize) -> &ClientObjective {
        &self.clients[i]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.clients.iter().map(|c| c.value(x)).sum::<f64>() / self.n() as f64
    }

    pub fn grad(&self, x: &[f64]) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for c in &self.clients {
            g.axpy(1.0, &c.grad(x));
        }
        g.scale(1.0 / self.n() as f64);
        g
    }

    /// `max_i L_i`; flagged unconverged if any client fell back to a trace bound.
    pub fn smoothness_bound(&self) -> SmoothnessEstimate {
        self.clients.iter().map(ClientObjective::smoothness).fold(
            SmoothnessEstimate {
                value: 0.0,
                converged: true,
            },
            |acc, s| SmoothnessEstimate {
                value: acc.value.max(s.value),
                converged: acc.converged && s.converged,
            },
        )
    }

    pub fn is_convex(&self) -> bool {
        self.clients.iter().all(ClientObjective::is_convex)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_gradient_at_zero() {
        let p = Problem::counterexample();
        assert_eq!(p.grad(&[0.0]).as_slice(), &[-2.0]);
        // F = (x-1)² + 4
        for x in [-1.0, 0.0, 0.5, 1.0] {
            assert!((p.value(&[x]) - ((x - 1.0) * (x - 1.0) + 4.0)).abs() < 1e-12);
        }
        assert_eq!(p.smoothness_bound().value, 2.0);
    }

    #[test]
    fn smoothness_is_max_over_clients() {
        let q = |w| QuadraticClient::new(Vector::zeros(2), w).unwrap().into();
        let p = Problem::new(vec![q(1.0), q(3.0)]).unwrap();
        assert_eq!(p.smoothness_bound().value, 6.0);
    }

    #[test]
    fn rejects_mixed_dimensions() {
        let a = QuadraticClient::new(Vector::zeros(2), 1.0).unwrap().into();
        let b = QuadraticClient::new(Vector::zeros(3), 1.0).unwrap().into();
        assert!(Problem::new(vec![a, b]).is_err());
        assert!(Problem::new(vec![]).is_err());
    }
}
