use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};
use crate::objectives::Problem;
use crate::sets::FeasibleSet;
use crate::state::{consensus_distance, FederationState};

/// Membership tolerance used before evaluating gaps.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `gap(x) = max_{u in D} <grad F(x), x - u>` for a feasible `x`.
pub fn fw_gap(problem: &Problem, set: &FeasibleSet, x: &[f64]) -> Result<f64> {
    let residual = set.residual(x);
    if residual.is_nan() || residual > FEASIBILITY_TOL {
        return Err(Error::Infeasible {
            residual,
            tol: FEASIBILITY_TOL,
        });
    }
    fw_gap_unchecked(problem, set, x)
}

/// Same formula without the feasibility check; may be negative off the set.
pub fn fw_gap_unchecked(problem: &Problem, set: &FeasibleSet, x: &[f64]) -> Result<f64> {
    set.linear_gap(&problem.grad(x), x)
}

/// `g_i = (1/n) grad f_i(x_i) + lambda (x_i - x̄)` with `x̄` the exact model mean.
pub fn surrogate_direction(
    problem: &Problem,
    state: &FederationState,
    centre: &[f64],
    i: usize,
    lambda: f64,
) -> Vector {
    let x = &state.clients[i].x;
    let inv_n = 1.0 / state.n() as f64;
    problem
        .client(i)
        .grad(x)
        .iter()
        .zip(x.iter().zip(centre))
        .map(|(gk, (xk, ck))| gk * inv_n + lambda * (xk - ck))
        .collect()
}

/// `Σ_i <g_i, x_i - lmo_i(g_i)>`, each client minimizing over its own set.
///
/// `sets` is indexed by the clients' `set_id`.
pub fn surrogate_gap(
    problem: &Problem,
    sets: &[FeasibleSet],
    state: &FederationState,
    lambda: f64,
) -> Result<f64> {
    let centre = state.model_mean();
    let mut total = 0.0;
    for (i, slot) in state.clients.iter().enumerate() {
        let g = surrogate_direction(problem, state, &centre, i, lambda);
        let s = sets[slot.set_id].lmo(&g)?;
        total += dot(&g, &slot.x) - dot(&g, &s);
    }
    Ok(total)
}

/// Penalized objective `(1/n) Σ f_i(x_i) + (lambda/2) dist²(X, C)`.
pub fn surrogate_value(problem: &Problem, state: &FederationState, lambda: f64) -> f64 {
    let n = state.n() as f64;
    let loss: f64 = state
        .clients
        .iter()
        .enumerate()
        .map(|(i, c)| problem.client(i).value(&c.x))
        .sum::<f64>()
        / n;
    let dist = consensus_distance(state);
    loss + 0.5 * lambda * dist * dist
}
