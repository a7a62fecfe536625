//! Compact convex feasible sets and their linear minimization oracles.
//!
//! Every set exposes the oracle `lmo(g) ∈ argmin_{x ∈ D} <g, x>`, a membership
//! test with tolerance, its Euclidean diameter, Euclidean projection (used for
//! closed-form reference optima), and a sampler for random feasible points.
//!
//! Ties are broken deterministically: argmax/argmin ties go to the lowest
//! index, and a zero gradient selects the lexicographically first vertex
//! (`+r e_1` for the balls, `lo` for a box, `scale e_1` for a simplex).

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm, Vector};

/// Shape of a feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// `{x : ||x||_1 <= radius}`
    L1Ball { radius: f64 },
    /// `{x : ||x||_2 <= radius}`
    L2Ball { radius: f64 },
    /// `{x : lo <= x <= hi}` coordinatewise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x >= 0 : sum(x) = scale}`
    Simplex { scale: f64 },
}

/// A validated feasible set of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    kind: SetKind,
    dim: usize,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidSet(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn nonzero_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidSet("dimension must be at least 1".into()));
    }
    Ok(())
}

impl FeasibleSet {
    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        nonzero_dim(dim)?;
        positive("radius", radius)?;
        Ok(Self {
            kind: SetKind::L1Ball { radius },
            dim,
        })
    }

    pub fn l2_ball(dim: usize, radius: f64) -> Result<Self> {
        nonzero_dim(dim)?;
        positive("radius", radius)?;
        Ok(Self {
            kind: SetKind::L2Ball { radius },
            dim,
        })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        nonzero_dim(lo.len())?;
        check_dim(lo.len(), hi.len())?;
        for (k, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidSet(format!(
                    "box bounds must satisfy lo < hi, coordinate {k}: [{l}, {h}]"
                )));
            }
        }
        let dim = lo.len();
        Ok(Self {
            kind: SetKind::Box { lo, hi },
            dim,
        })
    }

    /// Box with the same bounds `[lo, hi]` in every coordinate.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn simplex(dim: usize, scale: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSet(
                "a simplex needs at least 2 coordinates".into(),
            ));
        }
        positive("scale", scale)?;
        Ok(Self {
            kind: SetKind::Simplex { scale },
            dim,
        })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Linear minimization oracle: a minimizer of `<g, x>` over the set.
    pub fn lmo(&self, g: &[f64]) -> Result<Vector> {
        check_dim(self.dim, g.len())?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient passed to lmo".into()));
        }
        Ok(self.lmo_unchecked(g))
    }

    pub(crate) fn lmo_unchecked(&self, g: &[f64]) -> Vector {
        let dim = self.dim;
        match &self.kind {
            SetKind::L1Ball { radius } => {
                let k = argmax_abs(g);
                let sign = if g[k] > 0.0 { -1.0 } else { 1.0 };
                Vector::basis(dim, k, sign * radius)
            }
            SetKind::L2Ball { radius } => {
                let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if scale == 0.0 {
                    return Vector::basis(dim, 0, *radius);
                }
                let scaled: Vec<f64> = g.iter().map(|v| v / scale).collect();
                let n = norm(&scaled);
                scaled.iter().map(|v| -radius * v / n).collect()
            }
            SetKind::Box { lo, hi } => g
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(gk, (l, h))| if *gk < 0.0 { *h } else { *l })
                .collect(),
            SetKind::Simplex { scale } => Vector::basis(dim, argmin(g), *scale),
        }
    }

    /// Amount by which `x` violates the constraints (`<= 0` when feasible).
    pub fn residual(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SetKind::L1Ball { radius } => x.iter().map(|v| v.abs()).sum::<f64>() - radius,
            SetKind::L2Ball { radius } => norm(x) - radius,
            SetKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h))
                .fold(f64::NEG_INFINITY, f64::max),
            SetKind::Simplex { scale } => {
                let neg = x.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
                let sum = (x.iter().sum::<f64>() - scale).abs();
                neg.max(sum)
            }
        }
    }

    /// `true` iff `x` has the set's dimension and violates no constraint by more than `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite()) && self.residual(x) <= tol
    }

    /// Euclidean diameter `max_{x,y} ||x - y||`.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SetKind::L1Ball { radius } | SetKind::L2Ball { radius } => 2.0 * radius,
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l) * (h - l))
                .sum::<f64>()
                .sqrt(),
            SetKind::Simplex { scale } => scale * std::f64::consts::SQRT_2,
        }
    }

    /// Whether `x` is an extreme point (vertex) of the set, within `tol`.
    pub fn is_extreme_point(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.kind {
            SetKind::L1Ball { radius } | SetKind::Simplex { scale: radius } => {
                let nonzero: Vec<f64> = x.iter().copied().filter(|v| *v != 0.0).collect();
                let sign_ok = !matches!(self.kind, SetKind::Simplex { .. })
                    || nonzero.iter().all(|v| *v > 0.0);
                nonzero.len() == 1 && (nonzero[0].abs() - radius).abs() <= tol && sign_ok
            }
            SetKind::L2Ball { radius } => (norm(x) - radius).abs() <= tol,
            SetKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| (v - l).abs() <= tol || (v - h).abs() <= tol),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.kind {
            SetKind::L2Ball { radius } => {
                let n = norm(x);
                if n <= *radius {
                    x.to_vec().into()
                } else {
                    x.iter().map(|v| v * radius / n).collect()
                }
            }
            SetKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            SetKind::Simplex { scale } => project_simplex(x, *scale),
            SetKind::L1Ball { radius } => {
                if x.iter().map(|v| v.abs()).sum::<f64>() <= *radius {
                    x.to_vec().into()
                } else {
                    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
                    let p = project_simplex(&abs, *radius);
                    p.iter().zip(x).map(|(pk, xk)| pk.copysign(*xk)).collect()
                }
            }
        })
    }

    /// Draws a random feasible point. Balls and the simplex are sampled
    /// uniformly by volume/area, boxes uniformly per coordinate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let dim = self.dim;
        match &self.kind {
            SetKind::L2Ball { radius } => {
                let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let n = norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                dir.iter().map(|v| v * r / n).collect()
            }
            SetKind::L1Ball { radius } => {
                let e: Vec<f64> = (0..=dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                e[..dim]
                    .iter()
                    .map(|v| {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * radius * v / total
                    })
                    .collect()
            }
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
            SetKind::Simplex { scale } => {
                let e: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                e.iter().map(|v| scale * v / total).collect()
            }
        }
    }

    /// `max_{u in D} <g, x - u>`, the Frank-Wolfe gap of the linear functional `g` at `x`.
    pub fn linear_gap(&self, g: &[f64], x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let s = self.lmo(g)?;
        Ok(dot(g, x) - dot(g, &s))
    }
}

impl fmt::Display for FeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SetKind::L1Ball { radius } => write!(f, "l1-ball(r={radius}, dim={})", self.dim),
            SetKind::L2Ball { radius } => write!(f, "l2-ball(r={radius}, dim={})", self.dim),
            SetKind::Box { .. } => write!(f, "box(dim={})", self.dim),
            SetKind::Simplex { scale } => write!(f, "simplex(scale={scale}, dim={})", self.dim),
        }
    }
}

fn argmax_abs(g: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in g.iter().enumerate() {
        if v.abs() > g[best].abs() {
            best = k;
        }
    }
    best
}

fn argmin(g: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in g.iter().enumerate() {
        if *v < g[best] {
            best = k;
        }
    }
    best
}

/// Projection onto `{x >= 0 : sum(x) = scale}` by the sort-and-threshold rule.
fn project_simplex(v: &[f64], scale: f64) -> Vector {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - scale) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
