//! Invariant checks against a live run.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};
use crate::rng::{stream, Purpose};
use crate::sets::FeasibleSet;

use super::config::RunConfig;
use super::run::prepare;

pub const VERIFY_TOL: f64 = 1e-9;
/// Longer runs are truncated (which also shortens horizon-dependent schedules).
pub const VERIFY_MAX_ROUNDS: usize = 2000;
pub const LMO_GRADIENTS: usize = 200;
pub const LMO_SAMPLES: usize = 2000;

/// Outcome of one invariant over all its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub observations: usize,
    pub violations: usize,
    /// Smallest slack seen; negative means violated.
    pub worst_slack: f64,
    /// Round (or probe index) of the first violation.
    pub first_violation: Option<usize>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.observations > 0
    }
}

/// Accumulates slacks per named invariant. A strict tracker turns the first
/// violation into an error.
#[derive(Debug, Clone, Default)]
pub struct Invariants {
    checks: Vec<CheckResult>,
    strict: bool,
}

impl Invariants {
    pub fn new(strict: bool) -> Self {
        Self {
            checks: Vec::new(),
            strict,
        }
    }

    /// Records `slack` (≥ 0 passes; NaN fails) for `name` at `round`.
    pub fn observe(&mut self, name: &str, round: usize, slack: f64) -> Result<()> {
        let idx = match self.checks.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.checks.push(CheckResult {
                    name: name.to_owned(),
                    observations: 0,
                    violations: 0,
                    worst_slack: f64::INFINITY,
                    first_violation: None,
                });
                self.checks.len() - 1
            }
        };
        let c = &mut self.checks[idx];
        c.observations += 1;
        let ok = slack >= 0.0;
        c.worst_slack = c.worst_slack.min(if slack.is_nan() {
            f64::NEG_INFINITY
        } else {
            slack
        });
        if !ok {
            c.violations += 1;
            c.first_violation.get_or_insert(round);
            if self.strict {
                return Err(Error::Verification {
                    round,
                    what: format!("{name} (slack {slack:e})"),
                });
            }
        }
        Ok(())
    }

    pub fn into_report(self) -> VerifyReport {
        VerifyReport {
            checks: self.checks,
        }
    }
}

/// Pass/fail per invariant with the worst observed slack.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{} {:<28} worst_slack={:+.3e} n={}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.worst_slack,
                c.observations
            )?;
            if let Some(r) = c.first_violation {
                write!(f, " violations={} first_at={r}", c.violations)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A linear minimization oracle, injectable so that faulty ones can be tested.
pub type LmoFn<'a> = &'a dyn Fn(&FeasibleSet, &[f64]) -> Result<Vector>;

/// Checks `lmo` on `set`: feasibility and extremality of its output, and that
/// `<g, lmo(g)>` is no larger than `<g, u>` over random feasible `u`.
pub fn check_lmo(
    inv: &mut Invariants,
    set: &FeasibleSet,
    lmo: LmoFn<'_>,
    seed: u64,
    gradients: usize,
    samples: usize,
) -> Result<()> {
    let dim = set.dim();
    let mut rng = stream(seed, 0, 1, Purpose::Sampling);
    let points: Vec<Vector> = (0..samples).map(|_| set.sample(&mut rng)).collect();
    for k in 0..gradients {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let s = lmo(set, &g)?;
        inv.observe("lmo-feasible", k, VERIFY_TOL - set.residual(&s))?;
        inv.observe(
            "lmo-extreme-point",
            k,
            if set.is_extreme_point(&s, 1e-9) {
                0.0
            } else {
                -1.0
            },
        )?;
        let best = points
            .iter()
            .map(|u| dot(&g, u))
            .fold(f64::INFINITY, f64::min);
        inv.observe("lmo-oracle-optimality", k, best - dot(&g, &s) + VERIFY_TOL)?;
    }
    Ok(())
}

/// Runs the invariant suite against `cfg` using the built-in oracle.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    verify_with_lmo(cfg, &|set, g| set.lmo(g))
}

/// Like [`verify`], with the oracle under test supplied by the caller.
pub fn verify_with_lmo(cfg: &RunConfig, lmo: LmoFn<'_>) -> Result<VerifyReport> {
    let mut cfg = cfg.clone();
    if cfg.run.rounds > VERIFY_MAX_ROUNDS {
        log::warn!(
            "verify truncates the run from {} to {VERIFY_MAX_ROUNDS} rounds",
            cfg.run.rounds
        );
        cfg.run.rounds = VERIFY_MAX_ROUNDS;
    }
    cfg.run.verify = true;
    let mut inv = Invariants::new(false);

    let prepared = prepare(&cfg)?;
    let mut sets = vec![prepared.federation.global_set().clone()];
    for s in prepared.federation.client_sets() {
        if !sets.contains(s) {
            sets.push(s.clone());
        }
    }
    for set in &sets {
        check_lmo(&mut inv, set, lmo, cfg.run.seed, LMO_GRADIENTS, LMO_SAMPLES)?;
    }

    let (first, _) = prepared.execute(Some(&mut inv), None)?;

    let mut other = cfg.clone();
    other.run.workers = if cfg.run.workers == 1 { 2 } else { 1 };
    other.run.verify = false;
    let (second, _) = prepare(&other)?.execute(None, None)?;
    let same = first.rows.len() == second.rows.len()
        && first
            .rows
            .iter()
            .zip(&second.rows)
            .all(|(a, b)| a.to_csv() == b.to_csv());
    inv.observe("worker-count-determinism", 0, if same { 0.0 } else { -1.0 })?;

    Ok(inv.into_report())
}
