//! Executes one configured run and turns it into metric rows and artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::info;

use crate::engine::{
    run_naive_baseline, AlgorithmKind, Federation, ParticipationPolicy, Regime, RoundReport,
};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::metrics::{
    consensus_bound, fw_gap, partial_convex_bound, reference_optimum, stochastic_c,
    stochastic_envelope, stochastic_q, theorem1_surrogate_bound, theorem2_gap_bound,
    BoundConstants, FwCertificate, RoundMetrics,
};
use crate::objectives::StochasticOracle;

use super::config::RunConfig;
use super::output::{
    format_float, save_model, MetricsRow, MetricsWriter, MODEL_FILE, NAIVE_FILE,
    RESOLVED_CONFIG_FILE,
};
use super::verify::{Invariants, VERIFY_TOL};

/// Which guarantee fills the `bound` column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    /// Penalized residual after each round, convex schedule.
    Theorem1,
    /// Mean surrogate gap over the horizon; reported on the last row.
    Theorem2,
    /// Expected penalized residual under random participation.
    PartialConvex { participation: f64 },
    /// Expected penalized residual of the stochastic variant, with the constant `C`.
    Stochastic { big_c: f64 },
}

/// Everything needed to run a config, before the first round.
#[derive(Debug)]
pub struct PreparedRun {
    pub federation: Federation,
    /// Centralized solution of the global problem (convex problems only).
    pub reference: Option<FwCertificate>,
    pub constants: BoundConstants,
    pub bound: Option<BoundKind>,
    /// Whether the consensus envelope applies.
    pub consensus: bool,
    pub dual_norm: f64,
    pub rounds: usize,
}

/// In-memory result of a run.
#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    /// Per-round wall time in milliseconds, row aligned.
    pub wall_ms: Vec<f64>,
    /// Recursion residuals of rounds `1..=T`.
    pub recursion: Vec<Option<f64>>,
    pub final_model: Vector,
    pub reference: Option<FwCertificate>,
    pub bound: Option<BoundKind>,
    /// Naive baseline trajectory `x̄^1..x̄^{T+1}`, when requested.
    pub naive: Option<Vec<Vector>>,
}

impl RunOutput {
    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("row 0 is always present")
    }
}

/// Builds the federation described by `cfg` and everything its rows are compared to.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedRun> {
    prepare_with_reference(cfg, None)
}

/// Centralized solution of the problem in `cfg`, if it is convex.
pub fn reference_for(cfg: &RunConfig) -> Result<Option<FwCertificate>> {
    let problem = cfg.build_problem()?;
    if !problem.is_convex() {
        return Ok(None);
    }
    let set = cfg.build_set(problem.dim())?;
    reference_optimum(&problem, &set, cfg.metrics.reference_iterations).map(Some)
}

/// Like [`prepare`], reusing a reference solution computed earlier for the
/// same problem and set.
pub fn prepare_with_reference(
    cfg: &RunConfig,
    reference: Option<FwCertificate>,
) -> Result<PreparedRun> {
    let problem = cfg.build_problem()?;
    let dim = problem.dim();
    let n = problem.n();
    let set = cfg.build_set(dim)?;
    let algorithm = cfg.algorithm()?;
    let schedule = cfg.schedule()?;
    let seed = cfg.run.seed;

    let mut builder = Federation::builder(problem, set)
        .algorithm(algorithm)
        .schedule(schedule)
        .participation(ParticipationPolicy::new(cfg.run.participation, seed)?)
        .workers(cfg.run.workers);
    if let Some(b) = cfg.run.batch_size {
        builder = builder.oracle(StochasticOracle::new(b, seed)?);
    }
    if let Some(sets) = cfg.build_client_sets(n, dim)? {
        builder = builder.client_sets(sets, seed);
    }
    if let Some(x0) = cfg.init() {
        builder = builder.init(x0);
    }
    let federation = builder.build()?;
    let problem = federation.problem();
    let convex = problem.is_convex();

    let reference = match reference {
        Some(r) if convex => Some(r),
        _ if convex => Some(reference_optimum(
            problem,
            federation.global_set(),
            cfg.metrics.reference_iterations,
        )?),
        _ => None,
    };
    let regime = schedule.regime();
    let nonconvex_regime = matches!(
        regime,
        Regime::NonconvexT2 { .. } | Regime::PartialNonconvex { .. }
    );
    let anchor = reference
        .as_ref()
        .map_or(&federation.state().x_bar, |r| &r.x)
        .clone();
    let constants = federation.bound_constants(
        &anchor,
        nonconvex_regime.then_some(cfg.metrics.reference_iterations),
        cfg.metrics.sigma,
    )?;

    let full = federation.participation().is_full();
    let bound = match (algorithm, regime) {
        (AlgorithmKind::FedFw, Regime::ConvexT1) if convex && full => Some(BoundKind::Theorem1),
        (AlgorithmKind::FedFw, Regime::NonconvexT2 { .. }) if full => Some(BoundKind::Theorem2),
        (AlgorithmKind::FedFw, Regime::PartialConvex { participation }) if convex => {
            Some(BoundKind::PartialConvex { participation })
        }
        (AlgorithmKind::FedFwSto, Regime::StoT3) if convex && cfg.metrics.sigma.is_some() => {
            let mismatch: f64 = federation
                .state()
                .clients
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let g = problem.client(i).grad(&c.x);
                    g.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64
                })
                .sum();
            let q = stochastic_q(&constants, mismatch);
            Some(BoundKind::Stochastic {
                big_c: stochastic_c(&constants, q),
            })
        }
        _ => None,
    };
    let consensus =
        algorithm == AlgorithmKind::FedFw && regime == Regime::ConvexT1 && convex && full;
    Ok(PreparedRun {
        federation,
        reference,
        constants,
        bound,
        consensus,
        dual_norm: cfg.metrics.dual_norm,
        rounds: cfg.run.rounds,
    })
}

impl PreparedRun {
    /// Adds residuals and envelopes to a measured row.
    pub fn row(&self, m: RoundMetrics) -> MetricsRow {
        let f_star = self.reference.as_ref().map(|r| r.value);
        let t = m.t;
        let bound = match self.bound {
            _ if t == 0 => None,
            Some(BoundKind::Theorem1) => Some(theorem1_surrogate_bound(&self.constants, t)),
            Some(BoundKind::Theorem2) => {
                (t == self.rounds).then(|| theorem2_gap_bound(&self.constants, self.rounds))
            }
            Some(BoundKind::PartialConvex { participation }) => {
                Some(partial_convex_bound(&self.constants, t, participation))
            }
            Some(BoundKind::Stochastic { big_c }) => Some(stochastic_envelope(big_c, t + 1)),
            None => None,
        };
        let consensus_bound =
            (self.consensus && t > 0).then(|| consensus_bound(&self.constants, t, self.dual_norm));
        MetricsRow {
            metrics: m,
            residual: f_star.map(|f| m.objective - f),
            surrogate_residual: f_star.map(|f| m.surrogate_value - f),
            bound,
            consensus_bound,
        }
    }

    /// Runs every round, collecting rows. With `checks`, the live invariants
    /// are evaluated after each round.
    pub fn execute(
        mut self,
        mut checks: Option<&mut Invariants>,
        mut sink: Option<&mut MetricsWriter>,
    ) -> Result<(RunOutput, Federation)> {
        let mut rows = Vec::with_capacity(self.rounds + 1);
        let mut wall_ms = Vec::with_capacity(self.rounds + 1);
        let mut recursion = Vec::with_capacity(self.rounds);

        let start = Instant::now();
        let row0 = self.row(self.federation.initial_metrics().map_err(at_round(0))?);
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        if let Some(s) = sink.as_deref_mut() {
            s.write(&row0, elapsed)?;
        }
        rows.push(row0);
        wall_ms.push(elapsed);

        let mut last_lambda = None;
        for _ in 0..self.rounds {
            let start = Instant::now();
            let (report, m) = self
                .federation
                .run_round()
                .map_err(at_round(self.federation.round()))?;
            let row = self.row(m);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            if let Some(inv) = checks.as_deref_mut() {
                self.check_round(inv, &report, &row, last_lambda)?;
            }
            last_lambda = Some(report.step.lambda);
            if let Some(s) = sink.as_deref_mut() {
                s.write(&row, elapsed)?;
            }
            recursion.push(report.recursion_residual);
            rows.push(row);
            wall_ms.push(elapsed);
        }
        if let (Some(inv), Some(BoundKind::Theorem2)) = (checks, self.bound) {
            let mean = rows[..self.rounds]
                .iter()
                .map(|r| r.metrics.surrogate_gap)
                .sum::<f64>()
                / self.rounds as f64;
            let bound = theorem2_gap_bound(&self.constants, self.rounds);
            inv.observe("theorem2-mean-gap", self.rounds, bound + VERIFY_TOL - mean)?;
        }
        let out = RunOutput {
            final_model: self.federation.state().x_bar.clone(),
            rows,
            wall_ms,
            recursion,
            reference: self.reference,
            bound: self.bound,
            naive: None,
        };
        Ok((out, self.federation))
    }

    fn check_round(
        &self,
        inv: &mut Invariants,
        report: &RoundReport,
        row: &MetricsRow,
        last_lambda: Option<f64>,
    ) -> Result<()> {
        let t = report.round;
        let fed = &self.federation;
        let state = fed.state();
        let m = &row.metrics;
        let worst_residual = state
            .clients
            .iter()
            .enumerate()
            .map(|(i, c)| fed.client_set(i).residual(&c.x))
            .fold(0.0, f64::max);
        inv.observe("client-feasibility", t, VERIFY_TOL - worst_residual)?;
        inv.observe("step-size-in-unit-interval", t, m.eta.min(1.0 - m.eta))?;
        if let Some(prev) = last_lambda {
            inv.observe("penalty-nondecreasing", t, m.lambda - prev)?;
        }
        if let Some(r) = report.recursion_residual {
            inv.observe("recursion-matches-mean", t, VERIFY_TOL - r)?;
        }
        if !fed.is_split() {
            inv.observe("fw-gap-nonnegative", t, m.fw_gap + VERIFY_TOL)?;
        }
        inv.observe("surrogate-gap-nonnegative", t, m.surrogate_gap + VERIFY_TOL)?;
        let algorithm = fed.algorithm();
        let max_abs = |v: &Vector| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut unused = 0.0f64;
        for c in &state.clients {
            if algorithm != AlgorithmKind::FedFwPlus {
                unused = unused.max(max_abs(&c.y));
            }
            if algorithm != AlgorithmKind::FedFwSto {
                unused = unused.max(max_abs(&c.d));
            }
        }
        inv.observe("unused-state-zero", t, 0.0 - unused)?;
        if let (Some(BoundKind::Theorem1), Some(b), Some(r)) =
            (self.bound, row.bound, row.surrogate_residual)
        {
            inv.observe("theorem1-inequality", t, b + VERIFY_TOL - r)?;
        }
        Ok(())
    }
}

fn at_round(t: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} (round {t})")),
        other => other,
    }
}

/// Runs `cfg` in memory. With `verify` set in the config, live invariants
/// are checked and the first violation aborts the run.
pub fn run_in_memory(cfg: &RunConfig) -> Result<RunOutput> {
    run_with(cfg, None, None).map(|(out, _)| out)
}

/// Runs `cfg` and writes `metrics.csv`, `timing.csv`, `final_model.bin` and
/// `resolved_config.toml` (plus `naive_baseline.csv` if requested) into `out`.
pub fn run_to_dir(cfg: &RunConfig, out: &Path) -> Result<RunOutput> {
    run_to_dir_with_reference(cfg, out, None)
}

pub(crate) fn run_to_dir_with_reference(
    cfg: &RunConfig,
    out: &Path,
    reference: Option<FwCertificate>,
) -> Result<RunOutput> {
    fs::create_dir_all(out)?;
    fs::write(out.join(RESOLVED_CONFIG_FILE), cfg.to_toml()?)?;
    let (output, fed) = run_with(cfg, Some(out), reference)?;
    save_model(&out.join(MODEL_FILE), &output.final_model)?;
    if let Some(naive) = &output.naive {
        write_naive(&out.join(NAIVE_FILE), &fed, naive)?;
    }
    info!(
        "run finished: {} rounds written to {}",
        cfg.run.rounds,
        out.display()
    );
    Ok(output)
}

pub(crate) fn run_with(
    cfg: &RunConfig,
    out: Option<&Path>,
    reference: Option<FwCertificate>,
) -> Result<(RunOutput, Federation)> {
    let prepared = prepare_with_reference(cfg, reference)?;
    let x0 = prepared.federation.state().x_bar.clone();
    let mut writer = out.map(MetricsWriter::create).transpose()?;
    let mut checks = cfg.run.verify.then(|| Invariants::new(true));
    let (mut output, fed) = prepared.execute(checks.as_mut(), writer.as_mut())?;
    if let Some(w) = writer {
        w.finish()?;
    }
    if cfg.run.naive_baseline {
        output.naive = Some(run_naive_baseline(
            fed.problem(),
            fed.global_set(),
            x0,
            cfg.run.rounds,
        )?);
    }
    Ok((output, fed))
}

fn write_naive(path: &Path, fed: &Federation, trajectory: &[Vector]) -> Result<()> {
    let problem = fed.problem();
    let set = fed.global_set();
    let mut w = BufWriter::new(File::create(path)?);
    let coords: Vec<String> = (0..problem.dim()).map(|k| format!("x_bar_{k}")).collect();
    writeln!(w, "t,objective,fw_gap,{}", coords.join(","))?;
    for (t, x) in trajectory.iter().enumerate() {
        let xs: Vec<String> = x.iter().map(|v| format_float(*v)).collect();
        writeln!(
            w,
            "{t},{},{},{}",
            format_float(problem.value(x)),
            format_float(fw_gap(problem, set, x)?),
            xs.join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}
