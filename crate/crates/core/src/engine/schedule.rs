//! Step-size, penalty and estimator-weight sequences.

use std::fmt;

use crate::error::{Error, Result};

/// Which guarantee a schedule is tuned for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// `eta = 2/(t+1)`, `lambda = lambda0 sqrt(t+1)`.
    ConvexT1,
    /// Constant `eta = T^(-2/3)`, `lambda = lambda0 T^(1/3)` for a fixed horizon `T`.
    NonconvexT2 { horizon: usize },
    /// `eta = 9/(t+8)`, `lambda = lambda0 sqrt(t+8)`, `rho = 4/(t+7)^(2/3)`.
    StoT3,
    /// `eta = 2/(p(t-1)+2)`, `lambda = lambda0 sqrt(p(t-1)+2)`.
    PartialConvex { participation: f64 },
    /// Constant `eta = (pT+1)^(-2/3)`, `lambda = lambda0 (pT+1)^(1/3)`.
    PartialNonconvex { horizon: usize, participation: f64 },
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConvexT1 => write!(f, "convex"),
            Self::NonconvexT2 { horizon } => write!(f, "nonconvex(T={horizon})"),
            Self::StoT3 => write!(f, "stochastic"),
            Self::PartialConvex { participation } => write!(f, "partial-convex(p={participation})"),
            Self::PartialNonconvex {
                horizon,
                participation,
            } => {
                write!(f, "partial-nonconvex(T={horizon}, p={participation})")
            }
        }
    }
}

/// Values of the schedule at one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub eta: f64,
    pub lambda: f64,
    /// Estimator weight; only defined for the stochastic regime or when overridden.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    regime: Regime,
    lambda0: f64,
    rho_override: Option<f64>,
}

impl Schedule {
    pub fn new(regime: Regime, lambda0: f64) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "lambda0 must be positive, got {lambda0}"
            )));
        }
        match regime {
            Regime::NonconvexT2 { horizon: 0 } | Regime::PartialNonconvex { horizon: 0, .. } => {
                return Err(Error::InvalidSchedule(
                    "horizon T must be at least 1".into(),
                ));
            }
            Regime::PartialConvex { participation: p }
            | Regime::PartialNonconvex {
                participation: p, ..
            } if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::InvalidSchedule(format!(
                    "participation must be in (0, 1], got {p}"
                )));
            }
            _ => {}
        }
        Ok(Self {
            regime,
            lambda0,
            rho_override: None,
        })
    }

    /// Replaces the estimator weight by a constant for every round.
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "rho must be in (0, 1], got {rho}"
            )));
        }
        self.rho_override = Some(rho);
        Ok(self)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn rho_override(&self) -> Option<f64> {
        self.rho_override
    }

    /// Whether `rho` is defined at every round.
    pub fn has_rho(&self) -> bool {
        self.rho_override.is_some() || self.regime == Regime::StoT3
    }

    /// Schedule values at round `t` (rounds start at 1; 0 is treated as 1).
    pub fn eval(&self, t: usize) -> Step {
        let t = t.max(1) as f64;
        let l0 = self.lambda0;
        let (eta, lambda, rho) = match self.regime {
            Regime::ConvexT1 => (2.0 / (t + 1.0), l0 * (t + 1.0).sqrt(), None),
            Regime::NonconvexT2 { horizon } => {
                let h = horizon as f64;
                (h.powf(-2.0 / 3.0), l0 * h.cbrt(), None)
            }
            Regime::StoT3 => (
                9.0 / (t + 8.0),
                l0 * (t + 8.0).sqrt(),
                Some(4.0 / (t + 7.0).powf(2.0 / 3.0)),
            ),
            Regime::PartialConvex { participation: p } => {
                let s = p * (t - 1.0) + 2.0;
                (2.0 / s, l0 * s.sqrt(), None)
            }
            Regime::PartialNonconvex {
                horizon,
                participation: p,
            } => {
                let s = p * horizon as f64 + 1.0;
                (s.powf(-2.0 / 3.0), l0 * s.cbrt(), None)
            }
        };
        Step {
            eta,
            lambda,
            rho: self.rho_override.or(rho),
        }
    }
}
