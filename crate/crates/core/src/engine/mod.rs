//! Round-based federated Frank-Wolfe algorithms.

mod client;
mod federation;
mod participation;
mod schedule;

pub use client::{
    fedfw_plus_step, fedfw_step, fedfw_sto_step, naive_step, update_estimator, AlgorithmKind,
    StepInput,
};
pub use federation::{
    check_containment, run_naive_baseline, Federation, FederationBuilder, RoundReport,
    CONTAINMENT_SAMPLES,
};
pub use participation::ParticipationPolicy;
pub use schedule::{Regime, Schedule, Step};
