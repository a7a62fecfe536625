//! Centralized reference solutions used to turn runs into residuals.

use crate::error::Result;
use crate::linalg::{dist_sq, dot, norm, Vector};
use crate::objectives::{ClientObjective, Problem};
use crate::sets::FeasibleSet;
use crate::state::FederationState;

/// Outcome of a centralized Frank-Wolfe run.
#[derive(Debug, Clone, PartialEq)]
pub struct FwCertificate {
    /// Best iterate found.
    pub x: Vector,
    pub value: f64,
    /// FW gap at `x`.
    pub gap: f64,
    /// `max_k f(x_k) - gap(x_k)`; a lower bound on the minimum when `f` is convex.
    pub lower_bound: f64,
    pub iterations: usize,
}

/// Frank-Wolfe with the short step `min(1, gap/(L ||s - x||²))`, stopping once
/// the gap drops below `tol`. `oracle` returns `(f(x), grad f(x))`.
pub fn centralized_fw<F>(
    oracle: F,
    set: &FeasibleSet,
    x0: Vector,
    smoothness: f64,
    max_iterations: usize,
    tol: f64,
) -> Result<FwCertificate>
where
    F: Fn(&[f64]) -> (f64, Vector),
{
    let mut x = x0;
    let mut best: Option<(Vector, f64, f64)> = None;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut iterations = 0;
    loop {
        let (value, grad) = oracle(&x);
        let s = set.lmo(&grad)?;
        let gap = dot(&grad, &x) - dot(&grad, &s);
        lower_bound = lower_bound.max(value - gap);
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((x.clone(), value, gap));
        }
        if gap <= tol || iterations == max_iterations {
            break;
        }
        let dsq = dist_sq(&s, &x);
        let gamma = if dsq > 0.0 && smoothness > 0.0 {
            (gap / (smoothness * dsq)).min(1.0)
        } else {
            1.0
        };
        x.iter_mut()
            .zip(s.iter())
            .for_each(|(xk, sk)| *xk += gamma * (sk - *xk));
        iterations += 1;
    }
    let (x, value, gap) = best.expect("at least one iterate");
    Ok(FwCertificate {
        x,
        value,
        gap,
        lower_bound,
        iterations,
    })
}

/// Reference solution of `min_{x in D} F(x)`.
///
/// Sums of convex quadratics collapse to `W ||x - c||² + const`, whose
/// minimizer is the projection of `c`; everything else goes through
/// [`centralized_fw`] from `lmo(0)`.
pub fn reference_optimum(
    problem: &Problem,
    set: &FeasibleSet,
    max_iterations: usize,
) -> Result<FwCertificate> {
    if let Some(centre) = quadratic_centre(problem) {
        let x = set.project(&centre)?;
        let value = problem.value(&x);
        let gap = set.linear_gap(&problem.grad(&x), &x)?;
        return Ok(FwCertificate {
            lower_bound: value - gap.max(0.0),
            x,
            value,
            gap,
            iterations: 0,
        });
    }
    let l = problem.smoothness_bound().value;
    let x0 = set.lmo(&Vector::zeros(problem.dim()))?;
    centralized_fw(
        |x| (problem.value(x), problem.grad(x)),
        set,
        x0,
        l,
        max_iterations,
        1e-12,
    )
}

/// `Σ w_i a_i / Σ w_i` when every client is a convex quadratic.
fn quadratic_centre(problem: &Problem) -> Option<Vector> {
    let mut total = 0.0;
    let mut centre = Vector::zeros(problem.dim());
    for c in problem.clients() {
        match c {
            ClientObjective::Quadratic(q) if q.is_convex() => {
                total += q.weight();
                centre.axpy(q.weight(), q.target());
            }
            _ => return None,
        }
    }
    centre.scale(1.0 / total);
    Some(centre)
}

/// A number no larger than `min_{x in D} f(x)`: exact for quadratics, a FW
/// certificate (`f - gap` at the best iterate) for convex MCLR clients.
pub fn client_lower_bound(
    client: &ClientObjective,
    set: &FeasibleSet,
    max_iterations: usize,
) -> Result<f64> {
    match client {
        ClientObjective::Quadratic(q) => q.min_over(set),
        ClientObjective::Mclr(m) => {
            let x0 = set.lmo(&Vector::zeros(m.dim()))?;
            let cert = centralized_fw(
                |x| (m.value(x), m.grad(x)),
                set,
                x0,
                m.smoothness().value,
                max_iterations,
                1e-12,
            )?;
            Ok(cert.lower_bound)
        }
    }
}

/// Upper estimate of `ℰ = (1/n) Σ f_i(x_i¹) - (1/n) Σ min_D f_i`.
pub fn init_gap_estimate(
    problem: &Problem,
    set: &FeasibleSet,
    initial: &FederationState,
    max_iterations: usize,
) -> Result<f64> {
    let n = problem.n() as f64;
    let mut total = 0.0;
    for (i, slot) in initial.clients.iter().enumerate() {
        let client = problem.client(i);
        total += client.value(&slot.x) - client_lower_bound(client, set, max_iterations)?;
    }
    Ok(total / n)
}

/// `G = L D + n ||grad F(x_hat)||`, with `x_hat` a reference solution.
pub fn gradient_bound(problem: &Problem, set: &FeasibleSet, x_hat: &[f64]) -> f64 {
    problem.smoothness_bound().value * set.diameter()
        + problem.n() as f64 * norm(&problem.grad(x_hat))
}
