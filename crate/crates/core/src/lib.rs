//! Federated Frank-Wolfe: projection-free federated optimization with
//! linear minimization oracles, and a harness for reproducible experiments.

pub mod engine;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod objectives;
pub mod rng;
pub mod sets;
pub mod state;

pub use engine::{AlgorithmKind, Federation, ParticipationPolicy, Regime, Schedule};
pub use error::{Error, Result};
pub use linalg::Vector;
pub use metrics::RoundMetrics;
pub use objectives::{ClientObjective, Problem};
pub use sets::FeasibleSet;
pub use state::FederationState;
