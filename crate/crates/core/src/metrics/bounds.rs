//! Closed-form convergence envelopes.

/// Problem constants the bounds are expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    /// Common smoothness constant `L` of the client losses.
    pub smoothness: f64,
    pub n: usize,
    /// Diameter `D` of the feasible set.
    pub diameter: f64,
    pub lambda0: f64,
    /// Gradient bound `G`.
    pub gradient_bound: f64,
    /// Initialization gap `ℰ` (an upper estimate), NaN when not estimated.
    pub init_gap: f64,
    /// Gradient noise level, when known.
    pub sigma: Option<f64>,
}

/// `2 n D² ((L/n)/(t+1) + lambda0/sqrt(t+1))`: bound on the penalized
/// residual after round `t` of the convex schedule.
pub fn theorem1_surrogate_bound(c: &BoundConstants, t: usize) -> f64 {
    let n = c.n as f64;
    let t1 = t as f64 + 1.0;
    2.0 * n * c.diameter.powi(2) * ((c.smoothness / n) / t1 + c.lambda0 / t1.sqrt())
}

/// `(ℰ + n D² lambda0 / 2)/T^(1/3) + (L D²/2)/T^(2/3)`: bound on the mean
/// surrogate gap over `T` rounds of the non-convex schedule.
pub fn theorem2_gap_bound(c: &BoundConstants, horizon: usize) -> f64 {
    let n = c.n as f64;
    let h = horizon as f64;
    let d2 = c.diameter.powi(2);
    (c.init_gap + n * d2 * c.lambda0 / 2.0) / h.cbrt()
        + (c.smoothness * d2 / 2.0) / h.powf(2.0 / 3.0)
}

/// `(2/(lambda0 sqrt(t+1))) (||Y*|| + D sqrt(lambda0 (L + n lambda0)))`.
pub fn consensus_bound(c: &BoundConstants, t: usize, dual_norm: f64) -> f64 {
    let n = c.n as f64;
    let root = (c.lambda0 * (c.smoothness + n * c.lambda0)).sqrt();
    2.0 / (c.lambda0 * (t as f64 + 1.0).sqrt()) * (dual_norm + c.diameter * root)
}

/// Expected penalized residual under participation `p`:
/// `(2 n D²/p) ((L/n)/(t + 2/p) + lambda0/sqrt(t + 2/p))`.
pub fn partial_convex_bound(c: &BoundConstants, t: usize, p: f64) -> f64 {
    let n = c.n as f64;
    let s = t as f64 + 2.0 / p;
    2.0 * n * c.diameter.powi(2) / p * ((c.smoothness / n) / s + c.lambda0 / s.sqrt())
}

/// `Q = max(||∇F̂(X¹) - D¹||² 7^(2/3), 16 n σ² + 81 L² D²/n)` for the
/// stochastic schedule; `init_mismatch_sq` is the squared Frobenius norm.
pub fn stochastic_q(c: &BoundConstants, init_mismatch_sq: f64) -> f64 {
    let n = c.n as f64;
    let sigma = c.sigma.unwrap_or(0.0);
    let first = init_mismatch_sq * 7f64.powf(2.0 / 3.0);
    let second = 16.0 * n * sigma * sigma + 81.0 * c.smoothness.powi(2) * c.diameter.powi(2) / n;
    first.max(second)
}

/// `C = (81/2) n D² (L/n + lambda0) + 9 D sqrt(Q)`.
pub fn stochastic_c(c: &BoundConstants, q: f64) -> f64 {
    let n = c.n as f64;
    40.5 * n * c.diameter.powi(2) * (c.smoothness / n + c.lambda0) + 9.0 * c.diameter * q.sqrt()
}

/// `9^(1/3) C/(t+7)^(1/3)`, the expected penalized residual envelope of the
/// stochastic schedule. Reported only; noise makes per-run assertion unsound.
pub fn stochastic_envelope(big_c: f64, t: usize) -> f64 {
    9f64.cbrt() * big_c / (t as f64 + 7.0).cbrt()
}
