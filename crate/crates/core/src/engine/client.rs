//! One local iteration of each algorithm variant.
//!
//! Every step reads only the client's own slot and the broadcast average, so
//! clients can run concurrently within a round.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{convex_combine_into, Vector};
use crate::objectives::ClientObjective;
use crate::sets::FeasibleSet;
use crate::state::ClientSlot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    FedFw,
    FedFwPlus,
    FedFwSto,
    /// Clients restart from the broadcast average and take a plain FW step on
    /// their own loss. Kept as a baseline that can stall away from the optimum.
    NaiveAvgFw,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [
        Self::FedFw,
        Self::FedFwPlus,
        Self::FedFwSto,
        Self::NaiveAvgFw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::FedFw => "fedfw",
            Self::FedFwPlus => "fedfw-plus",
            Self::FedFwSto => "fedfw-sto",
            Self::NaiveAvgFw => "naive",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown algorithm {s:?} (expected fedfw, fedfw-plus, fedfw-sto or naive)"
                ))
            })
    }
}

/// Round-level inputs shared by all clients.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub x_bar: &'a [f64],
    pub n: usize,
    pub eta: f64,
    pub lambda: f64,
}

/// `g = (1/n) grad + lambda (x - x_bar)`.
fn penalized_direction(grad: &[f64], x: &[f64], input: &StepInput<'_>) -> Vector {
    let inv_n = 1.0 / input.n as f64;
    grad.iter()
        .zip(x.iter().zip(input.x_bar))
        .map(|(gk, (xk, bk))| gk * inv_n + input.lambda * (xk - bk))
        .collect()
}

fn lmo_and_move(slot: &mut ClientSlot, set: &FeasibleSet, g: &[f64], eta: f64) -> Result<Vector> {
    let s = set.lmo(g)?;
    convex_combine_into(&mut slot.x, &s, eta)?;
    Ok(s)
}

/// FedFW: returns the communicated vertex `s_i` and moves `x_i` toward it.
pub fn fedfw_step(
    slot: &mut ClientSlot,
    objective: &ClientObjective,
    set: &FeasibleSet,
    input: &StepInput<'_>,
) -> Result<Vector> {
    let grad = objective.grad(&slot.x);
    let g = penalized_direction(&grad, &slot.x, input);
    lmo_and_move(slot, set, &g, input.eta)
}

/// FedFW+: accumulates `y_i += lambda0 (x_i - x_bar)` first and adds it to the direction.
pub fn fedfw_plus_step(
    slot: &mut ClientSlot,
    objective: &ClientObjective,
    set: &FeasibleSet,
    input: &StepInput<'_>,
    lambda0: f64,
) -> Result<Vector> {
    for ((yk, xk), bk) in slot.y.iter_mut().zip(slot.x.iter()).zip(input.x_bar) {
        *yk += lambda0 * (xk - bk);
    }
    let grad = objective.grad(&slot.x);
    let mut g = penalized_direction(&grad, &slot.x, input);
    g.axpy(1.0, &slot.y);
    lmo_and_move(slot, set, &g, input.eta)
}

/// FedFW-sto with an already drawn stochastic gradient of `f_i` at `x_i`:
/// `d_i = (1 - rho) d_i + rho (1/n) sample_grad`, then `g = d_i + lambda (x_i - x_bar)`.
pub fn fedfw_sto_step(
    slot: &mut ClientSlot,
    set: &FeasibleSet,
    input: &StepInput<'_>,
    rho: f64,
    sample_grad: &[f64],
) -> Result<Vector> {
    update_estimator(&mut slot.d, sample_grad, input.n, rho);
    let g: Vector = slot
        .d
        .iter()
        .zip(slot.x.iter().zip(input.x_bar))
        .map(|(dk, (xk, bk))| dk + input.lambda * (xk - bk))
        .collect();
    lmo_and_move(slot, set, &g, input.eta)
}

/// `d <- (1 - rho) d + rho (1/n) sample_grad`.
pub fn update_estimator(d: &mut [f64], sample_grad: &[f64], n: usize, rho: f64) {
    let inv_n = 1.0 / n as f64;
    d.iter_mut()
        .zip(sample_grad)
        .for_each(|(dk, gk)| *dk = (1.0 - rho) * *dk + rho * (gk * inv_n));
}

/// Naive averaging: `s_i = lmo(grad f_i(x_bar))`, `x_i = (1 - eta) x_bar + eta s_i`.
pub fn naive_step(
    slot: &mut ClientSlot,
    objective: &ClientObjective,
    set: &FeasibleSet,
    input: &StepInput<'_>,
) -> Result<Vector> {
    let g = objective.grad(input.x_bar);
    slot.x.copy_from_slice(input.x_bar);
    lmo_and_move(slot, set, &g, input.eta)
}
