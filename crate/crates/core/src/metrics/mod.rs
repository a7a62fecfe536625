//! Convergence measurements and bound evaluators.

mod bounds;
mod gaps;
mod reference;

pub use bounds::{
    consensus_bound, partial_convex_bound, stochastic_c, stochastic_envelope, stochastic_q,
    theorem1_surrogate_bound, theorem2_gap_bound, BoundConstants,
};
pub use gaps::{
    fw_gap, fw_gap_unchecked, surrogate_direction, surrogate_gap, surrogate_value, FEASIBILITY_TOL,
};
pub use reference::{
    centralized_fw, client_lower_bound, gradient_bound, init_gap_estimate, reference_optimum,
    FwCertificate,
};

use crate::engine::{Federation, RoundReport};
use crate::error::Result;
use crate::state::consensus_distance;

/// Measurements of the state left behind by one round.
///
/// Row `t` describes `X^{t+1}` and `x̄^{t+1}`; the penalized quantities use
/// the penalty `lambda` of round `t`. Row 0 describes the initial state with
/// the first round's penalty and `eta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMetrics {
    pub t: usize,
    /// `F(x̄)`.
    pub objective: f64,
    /// FW gap of `F` at `x̄` over the global set.
    pub fw_gap: f64,
    pub surrogate_gap: f64,
    /// Penalized objective `F̂_t(X)`.
    pub surrogate_value: f64,
    pub consensus_distance: f64,
    pub eta: f64,
    pub lambda: f64,
    pub rho: Option<f64>,
    pub active: usize,
    /// `x̄` lies in the global set (can fail only with split constraints).
    pub x_bar_feasible: bool,
}

/// Evaluates the current state of `fed` as the row for round `t`.
pub fn measure(
    fed: &Federation,
    t: usize,
    eta: f64,
    lambda: f64,
    rho: Option<f64>,
    active: usize,
) -> Result<RoundMetrics> {
    let problem = fed.problem();
    let state = fed.state();
    let global = fed.global_set();
    let x_bar = &state.x_bar;
    let x_bar_feasible = global.contains(x_bar, FEASIBILITY_TOL);
    let fw = if fed.is_split() {
        fw_gap_unchecked(problem, global, x_bar)?
    } else {
        fw_gap(problem, global, x_bar)?
    };
    Ok(RoundMetrics {
        t,
        objective: problem.value(x_bar),
        fw_gap: fw,
        surrogate_gap: surrogate_gap(problem, fed.client_sets(), state, lambda)?,
        surrogate_value: surrogate_value(problem, state, lambda),
        consensus_distance: consensus_distance(state),
        eta,
        lambda,
        rho,
        active,
        x_bar_feasible,
    })
}

impl Federation {
    /// Row 0: the initial state, measured with the first round's penalty.
    pub fn initial_metrics(&self) -> Result<RoundMetrics> {
        let step = self.schedule().eval(1);
        measure(self, 0, 0.0, step.lambda, step.rho, 0)
    }

    /// Runs one round and measures the resulting state.
    pub fn run_round(&mut self) -> Result<(RoundReport, RoundMetrics)> {
        let report = self.advance()?;
        let m = measure(
            self,
            report.round,
            report.step.eta,
            report.step.lambda,
            report.step.rho,
            report.active,
        )?;
        Ok((report, m))
    }

    /// Bound constants for this federation. `anchor` is the point the gradient
    /// bound is taken at (a reference solution when one is known). `ℰ` is
    /// estimated from the current client models only if `init_iterations` is
    /// given; otherwise it is NaN.
    pub fn bound_constants(
        &self,
        anchor: &[f64],
        init_iterations: Option<usize>,
        sigma: Option<f64>,
    ) -> Result<BoundConstants> {
        let problem = self.problem();
        let set = self.global_set();
        let init_gap = match init_iterations {
            Some(iters) => init_gap_estimate(problem, set, self.state(), iters)?,
            None => f64::NAN,
        };
        Ok(BoundConstants {
            smoothness: problem.smoothness_bound().value,
            n: problem.n(),
            diameter: set.diameter(),
            lambda0: self.schedule().lambda0(),
            gradient_bound: gradient_bound(problem, set, anchor),
            init_gap,
            sigma,
        })
    }
}
