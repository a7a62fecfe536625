//! Dense vector type and the handful of kernels the algorithms need.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector in the model space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `entries`, rejecting NaN and infinities.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "vector entry {k} = {}",
                entries[k]
            )));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The `k`-th standard basis vector scaled by `scale`.
    pub fn basis(dim: usize, k: usize, scale: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = scale;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scale(&mut self, c: f64) {
        self.0.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &[f64]) {
        axpy(&mut self.0, c, other);
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += c * xi);
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Returns `(1 - eta) * a + eta * b`.
pub fn convex_combine(a: &[f64], b: &[f64], eta: f64) -> Result<Vector> {
    check_dim(a.len(), b.len())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidStepSize(eta));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - eta) * x + eta * y)
        .collect())
}

/// In-place variant of [`convex_combine`]: `a <- (1 - eta) a + eta b`.
pub fn convex_combine_into(a: &mut [f64], b: &[f64], eta: f64) -> Result<()> {
    check_dim(a.len(), b.len())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidStepSize(eta));
    }
    a.iter_mut()
        .zip(b)
        .for_each(|(x, y)| *x = (1.0 - eta) * *x + eta * y);
    Ok(())
}

/// Coordinatewise mean of equally sized vectors, accumulated in index order.
pub fn mean<'a, I>(vectors: I, dim: usize) -> Vector
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = Vector::zeros(dim);
    let mut count = 0usize;
    for v in vectors {
        axpy(&mut acc, 1.0, v);
        count += 1;
    }
    if count > 0 {
        acc.scale(1.0 / count as f64);
    }
    acc
}
