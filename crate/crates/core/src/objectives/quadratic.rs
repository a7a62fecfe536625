use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm, Vector};
use crate::sets::{FeasibleSet, SetKind};

/// `f(x) = w ||x - a||²`. A negative `w` (built with [`QuadraticClient::concave`])
/// gives a concave client, used to make toy finite sums non-convex.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticClient {
    target: Vector,
    weight: f64,
}

impl QuadraticClient {
    pub fn new(target: Vector, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidObjective(format!(
                "quadratic weight must be positive, got {weight}"
            )));
        }
        Self::checked(target, weight)
    }

    /// `f(x) = -w ||x - a||²` with `w > 0`.
    pub fn concave(target: Vector, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidObjective(format!(
                "quadratic weight must be positive, got {weight}"
            )));
        }
        Self::checked(target, -weight)
    }

    fn checked(target: Vector, weight: f64) -> Result<Self> {
        if !target.is_finite() || target.dim() == 0 {
            return Err(Error::InvalidObjective(
                "quadratic target must be finite and non-empty".into(),
            ));
        }
        Ok(Self { target, weight })
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    /// Signed curvature weight (negative for concave clients).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn is_convex(&self) -> bool {
        self.weight > 0.0
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.weight * dist_sq(x, &self.target)
    }

    pub fn grad(&self, x: &[f64]) -> Vector {
        x.iter()
            .zip(self.target.iter())
            .map(|(xk, ak)| 2.0 * self.weight * (xk - ak))
            .collect()
    }

    /// Exact Lipschitz constant of the gradient, `2|w|`.
    pub fn smoothness(&self) -> f64 {
        2.0 * self.weight.abs()
    }

    /// `min_{x in D} f(x)` in closed form: the projection of the target for a
    /// convex client, the farthest point of `D` from the target for a concave one.
    pub fn min_over(&self, set: &FeasibleSet) -> Result<f64> {
        if self.is_convex() {
            let p = set.project(&self.target)?;
            return Ok(self.value(&p));
        }
        let a = &self.target;
        let far_sq = match set.kind() {
            SetKind::L2Ball { radius } => (norm(a) + radius).powi(2),
            SetKind::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(ak, (l, h))| (ak - l).abs().max((ak - h).abs()).powi(2))
                .sum(),
            // ||x - a||² is convex, so its maximum is attained at a vertex
            SetKind::L1Ball { radius } => (0..self.dim())
                .flat_map(|k| {
                    [*radius, -radius].map(|s| dist_sq(&Vector::basis(self.dim(), k, s), a))
                })
                .fold(f64::NEG_INFINITY, f64::max),
            SetKind::Simplex { scale } => (0..self.dim())
                .map(|k| dist_sq(&Vector::basis(self.dim(), k, *scale), a))
                .fold(f64::NEG_INFINITY, f64::max),
        };
        Ok(self.weight * far_sq)
    }
}
