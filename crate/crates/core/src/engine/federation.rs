//! The round loop: participation sampling, concurrent client steps, aggregation.

use log::{debug, warn};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::linalg::{mean, Vector};
use crate::objectives::{Problem, StochasticOracle};
use crate::rng::{stream, Purpose};
use crate::sets::FeasibleSet;
use crate::state::{ClientSlot, FederationState};

use super::client::{
    fedfw_plus_step, fedfw_step, fedfw_sto_step, naive_step, AlgorithmKind, StepInput,
};
use super::participation::ParticipationPolicy;
use super::schedule::{Regime, Schedule, Step};

/// Number of random points of the global set checked against every client set.
pub const CONTAINMENT_SAMPLES: usize = 1000;
const CONTAINMENT_TOL: f64 = 1e-9;

/// What happened in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub step: Step,
    pub active: usize,
    /// `max_k |x̄_rec - x̄|` between the server recursion and the recomputed
    /// mean; only measured when every client took part.
    pub recursion_residual: Option<f64>,
}

/// Configures a [`Federation`].
#[derive(Debug)]
pub struct FederationBuilder {
    problem: Problem,
    set: FeasibleSet,
    algorithm: AlgorithmKind,
    schedule: Option<Schedule>,
    participation: ParticipationPolicy,
    oracle: Option<StochasticOracle>,
    client_sets: Option<Vec<FeasibleSet>>,
    containment_seed: u64,
    init: Option<Vector>,
    workers: usize,
}

impl FederationBuilder {
    pub fn algorithm(mut self, algorithm: AlgorithmKind) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = Some(schedule);
        self
    }

    pub fn participation(mut self, policy: ParticipationPolicy) -> Self {
        self.participation = policy;
        self
    }

    pub fn oracle(mut self, oracle: StochasticOracle) -> Self {
        self.oracle = Some(oracle);
        self
    }

    /// Per-client supersets of the global set. Containment is checked by
    /// sampling with the given seed when the federation is built.
    pub fn client_sets(mut self, sets: Vec<FeasibleSet>, seed: u64) -> Self {
        self.client_sets = Some(sets);
        self.containment_seed = seed;
        self
    }

    /// Common starting model of every client (defaults to `lmo(0)`, a vertex).
    pub fn init(mut self, x0: Vector) -> Self {
        self.init = Some(x0);
        self
    }

    /// Worker threads for client steps; 1 runs them inline.
    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn build(self) -> Result<Federation> {
        let dim = self.problem.dim();
        let n = self.problem.n();
        if self.set.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.set.dim(),
            });
        }
        let schedule = match self.schedule {
            Some(s) => s,
            None => Schedule::new(Regime::ConvexT1, 1.0)?,
        };
        if self.algorithm == AlgorithmKind::FedFwSto {
            if !schedule.has_rho() {
                return Err(Error::Config(
                    "the stochastic algorithm needs the stochastic schedule or an explicit rho"
                        .into(),
                ));
            }
            if self.oracle.is_none() {
                return Err(Error::Config(
                    "the stochastic algorithm needs a minibatch oracle".into(),
                ));
            }
        }
        if let Regime::PartialConvex { participation: p }
        | Regime::PartialNonconvex {
            participation: p, ..
        } = schedule.regime()
        {
            if p != self.participation.probability() {
                warn!(
                    "schedule tuned for participation {p} but clients join with probability {}",
                    self.participation.probability()
                );
            }
        }
        let (sets, split) = match self.client_sets {
            None => (vec![self.set.clone(); n], false),
            Some(sets) => {
                if sets.len() != n {
                    return Err(Error::Config(format!(
                        "{} client sets given for {n} clients",
                        sets.len()
                    )));
                }
                check_containment(&self.set, &sets, self.containment_seed)?;
                let split = sets.iter().any(|s| *s != self.set);
                (sets, split)
            }
        };
        let x0 = match self.init {
            Some(x0) => {
                if x0.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: x0.dim(),
                    });
                }
                let residual = self.set.residual(&x0);
                if !x0.is_finite() || residual > CONTAINMENT_TOL {
                    return Err(Error::Infeasible {
                        residual,
                        tol: CONTAINMENT_TOL,
                    });
                }
                x0
            }
            None => self.set.lmo(&Vector::zeros(dim))?,
        };
        let pool = if self.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Federation {
            problem: self.problem,
            global_set: self.set,
            sets,
            split,
            algorithm: self.algorithm,
            schedule,
            participation: self.participation,
            oracle: self.oracle,
            pool,
            state: FederationState::uniform(n, x0)?,
        })
    }
}

/// Checks that every client set contains sampled points and axis vertices of `global`.
pub fn check_containment(global: &FeasibleSet, sets: &[FeasibleSet], seed: u64) -> Result<()> {
    let dim = global.dim();
    let mut rng = stream(seed, 0, 0, Purpose::Sampling);
    let mut probes: Vec<Vector> = (0..CONTAINMENT_SAMPLES)
        .map(|_| global.sample(&mut rng))
        .collect();
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            probes.push(global.lmo(&Vector::basis(dim, k, sign))?);
        }
    }
    for (i, set) in sets.iter().enumerate() {
        if set.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: set.dim(),
            });
        }
        if let Some(p) = probes.iter().find(|p| !set.contains(p, CONTAINMENT_TOL)) {
            return Err(Error::Containment {
                client: i,
                detail: format!(
                    "{set} misses a point of {global} (residual {:e})",
                    set.residual(p)
                ),
            });
        }
    }
    Ok(())
}

/// A simulated federation: problem, per-client sets, algorithm and state.
#[derive(Debug)]
pub struct Federation {
    problem: Problem,
    global_set: FeasibleSet,
    sets: Vec<FeasibleSet>,
    split: bool,
    algorithm: AlgorithmKind,
    schedule: Schedule,
    participation: ParticipationPolicy,
    oracle: Option<StochasticOracle>,
    pool: Option<ThreadPool>,
    state: FederationState,
}

impl Federation {
    pub fn builder(problem: Problem, set: FeasibleSet) -> FederationBuilder {
        FederationBuilder {
            problem,
            set,
            algorithm: AlgorithmKind::FedFw,
            schedule: None,
            participation: ParticipationPolicy::full(),
            oracle: None,
            client_sets: None,
            containment_seed: 0,
            init: None,
            workers: 1,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn global_set(&self) -> &FeasibleSet {
        &self.global_set
    }

    pub fn client_set(&self, i: usize) -> &FeasibleSet {
        &self.sets[self.state.clients[i].set_id]
    }

    pub fn client_sets(&self) -> &[FeasibleSet] {
        &self.sets
    }

    /// Whether some client uses a set other than the global one.
    pub fn is_split(&self) -> bool {
        self.split
    }

    pub fn algorithm(&self) -> AlgorithmKind {
        self.algorithm
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn participation(&self) -> &ParticipationPolicy {
        &self.participation
    }

    pub fn state(&self) -> &FederationState {
        &self.state
    }

    /// Index of the next round to run.
    pub fn round(&self) -> usize {
        self.state.round
    }

    /// Executes one round and returns what was done. Metrics are not computed here.
    pub fn advance(&mut self) -> Result<RoundReport> {
        let t = self.state.round;
        let step = self.schedule.eval(t);
        if !(0.0..=1.0).contains(&step.eta) {
            return Err(Error::InvalidStepSize(step.eta));
        }
        if !(step.lambda.is_finite() && step.lambda > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "penalty {} at round {t}",
                step.lambda
            )));
        }
        let n = self.state.n();
        let active = self.participation.active_set(n, t);
        let count = active.iter().filter(|&&a| a).count();
        if count == 0 {
            warn!("round {t}: no client participated; models unchanged");
            self.state.round += 1;
            return Ok(RoundReport {
                round: t,
                step,
                active: 0,
                recursion_residual: None,
            });
        }

        let x_bar = self.state.x_bar.clone();
        let input = StepInput {
            x_bar: &x_bar,
            n,
            eta: step.eta,
            lambda: step.lambda,
        };
        let ctx = ClientContext {
            problem: &self.problem,
            sets: &self.sets,
            algorithm: self.algorithm,
            lambda0: self.schedule.lambda0(),
            rho: step.rho,
            oracle: self.oracle.as_ref(),
            round: t,
        };
        let work = |(i, (slot, &on)): (usize, (&mut ClientSlot, &bool))| -> Result<Option<Vector>> {
            if !on {
                return Ok(None);
            }
            ctx.step(i, slot, &input).map(Some)
        };
        let clients = &mut self.state.clients;
        let results: Vec<Result<Option<Vector>>> = match &self.pool {
            Some(pool) => pool.install(|| {
                clients
                    .par_iter_mut()
                    .zip(active.par_iter())
                    .enumerate()
                    .map(work)
                    .collect()
            }),
            None => clients
                .iter_mut()
                .zip(active.iter())
                .enumerate()
                .map(work)
                .collect(),
        };
        let mut vertices = Vec::with_capacity(count);
        for r in results {
            if let Some(s) = r? {
                vertices.push(s);
            }
        }

        let dim = self.state.dim();
        self.state.x_bar = mean(self.state.clients.iter().map(|c| c.x.as_slice()), dim);
        let recursion_residual =
            (count == n && self.algorithm != AlgorithmKind::NaiveAvgFw).then(|| {
                let s_bar = mean(vertices.iter().map(Vector::as_slice), dim);
                x_bar
                    .iter()
                    .zip(s_bar.iter())
                    .zip(self.state.x_bar.iter())
                    .map(|((b, s), m)| ((1.0 - step.eta) * b + step.eta * s - m).abs())
                    .fold(0.0, f64::max)
            });
        debug!(
            "round {t}: {count}/{n} active, eta {:.3e}, lambda {:.3e}",
            step.eta, step.lambda
        );
        self.state.round += 1;
        Ok(RoundReport {
            round: t,
            step,
            active: count,
            recursion_residual,
        })
    }

    /// Runs `rounds` rounds without measuring anything.
    pub fn advance_by(&mut self, rounds: usize) -> Result<()> {
        for _ in 0..rounds {
            self.advance()?;
        }
        Ok(())
    }
}

/// Read-only view handed to every client step within a round.
struct ClientContext<'a> {
    problem: &'a Problem,
    sets: &'a [FeasibleSet],
    algorithm: AlgorithmKind,
    lambda0: f64,
    rho: Option<f64>,
    oracle: Option<&'a StochasticOracle>,
    round: usize,
}

impl ClientContext<'_> {
    fn step(&self, i: usize, slot: &mut ClientSlot, input: &StepInput<'_>) -> Result<Vector> {
        let objective = self.problem.client(i);
        let set = &self.sets[slot.set_id];
        let diverged = |e: Error| match e {
            Error::NonFinite(_) => Error::Diverged {
                round: self.round,
                client: i,
            },
            other => other,
        };
        let s = match self.algorithm {
            AlgorithmKind::FedFw => fedfw_step(slot, objective, set, input),
            AlgorithmKind::FedFwPlus => fedfw_plus_step(slot, objective, set, input, self.lambda0),
            AlgorithmKind::FedFwSto => {
                let (oracle, rho) = self
                    .oracle
                    .zip(self.rho)
                    .expect("checked when the federation was built");
                let sample = oracle.stochastic_grad(objective, i, &slot.x, self.round)?;
                fedfw_sto_step(slot, set, input, rho, &sample)
            }
            AlgorithmKind::NaiveAvgFw => naive_step(slot, objective, set, input),
        }
        .map_err(diverged)?;
        if !slot.x.is_finite() {
            return Err(Error::Diverged {
                round: self.round,
                client: i,
            });
        }
        Ok(s)
    }
}

/// Trajectory `x̄^1, .., x̄^{T+1}` of the naive averaging baseline under the
/// convex step sizes, starting every client at `x0`.
pub fn run_naive_baseline(
    problem: &Problem,
    set: &FeasibleSet,
    x0: Vector,
    rounds: usize,
) -> Result<Vec<Vector>> {
    let mut fed = Federation::builder(problem.clone(), set.clone())
        .algorithm(AlgorithmKind::NaiveAvgFw)
        .init(x0)
        .build()?;
    let mut out = Vec::with_capacity(rounds + 1);
    out.push(fed.state().x_bar.clone());
    for _ in 0..rounds {
        fed.advance()?;
        out.push(fed.state().x_bar.clone());
    }
    Ok(out)
}
