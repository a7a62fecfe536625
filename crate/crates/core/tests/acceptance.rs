//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! straight to stdout (so it survives output capture) and then asserts.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use fedfw_core::engine::{
    run_naive_baseline, update_estimator, AlgorithmKind, Federation, ParticipationPolicy, Regime,
    Schedule,
};
use fedfw_core::harness::{self, presets, RunConfig};
use fedfw_core::metrics::init_gap_estimate;
use fedfw_core::objectives::StochasticOracle;
use fedfw_core::rng::{stream, Purpose};
use fedfw_core::sets::SetKind;
use fedfw_core::{FeasibleSet, Problem, Vector};

/// Runtime budgets are only meaningful if criteria do not share the CPU.
static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: usize, pass: bool, elapsed: Duration, detail: String) {
    let line = format!(
        "criterion {n}: {} ({:.2}s) {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn box1() -> FeasibleSet {
    FeasibleSet::uniform_box(1, -1.0, 1.0).unwrap()
}

// Test-side objective of the quadratic presets: F(x) = (1/n) Σ w_i ||x - a_i||².
struct Quadratics {
    targets: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Quadratics {
    fn from_config(cfg: &RunConfig) -> Self {
        match &cfg.problem {
            harness::ProblemSpec::Quadratic { clients } => Self {
                targets: clients.iter().map(|c| c.target.clone()).collect(),
                weights: clients
                    .iter()
                    .map(|c| if c.concave { -c.weight } else { c.weight })
                    .collect(),
            },
            _ => panic!("quadratic preset expected"),
        }
    }

    fn n(&self) -> f64 {
        self.targets.len() as f64
    }

    fn f(&self, i: usize, x: &[f64]) -> f64 {
        self.weights[i]
            * x.iter()
                .zip(&self.targets[i])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
    }

    fn grad(&self, i: usize, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.targets[i])
            .map(|(a, b)| 2.0 * self.weights[i] * (a - b))
            .collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.targets.len()).map(|i| self.f(i, x)).sum::<f64>() / self.n()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn models(fed: &Federation) -> Vec<Vec<f64>> {
    fed.state().clients.iter().map(|c| c.x.to_vec()).collect()
}

fn centre(xs: &[Vec<f64>]) -> Vec<f64> {
    let n = xs.len() as f64;
    (0..xs[0].len())
        .map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / n)
        .collect()
}

fn federation(cfg: &RunConfig) -> Federation {
    harness::prepare(cfg).unwrap().federation
}

#[test]
fn criterion_01_counterexample_separation() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let problem = Problem::counterexample();
    let naive = run_naive_baseline(&problem, &box1(), Vector::zeros(1), 10_000).unwrap();
    let naive_worst = naive.iter().map(|x| x[0].abs()).fold(0.0, f64::max);

    let mut fed = Federation::builder(problem, box1())
        .algorithm(AlgorithmKind::FedFw)
        .schedule(Schedule::new(Regime::ConvexT1, 0.01).unwrap())
        .init(Vector::zeros(1))
        .build()
        .unwrap();
    fed.advance_by(10_000).unwrap();
    let x_bar = fed.state().x_bar[0];
    let elapsed = start.elapsed();

    let pass =
        naive_worst <= 1e-12 && (x_bar - 1.0).abs() <= 0.05 && elapsed < Duration::from_secs(2);
    report(
        1,
        pass,
        elapsed,
        format!("naive max|x_bar| = {naive_worst:e} (<= 1e-12); FedFW lambda0=0.01 x_bar(1e4) = {x_bar:.6} (need |x_bar-1| <= 0.05)"),
    );
    assert!(naive_worst <= 1e-12);
    assert!((x_bar - 1.0).abs() <= 0.05, "x_bar = {x_bar}");
    assert!(elapsed < Duration::from_secs(2));
}

#[test]
fn criterion_02_theorem1_inequality() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = presets::load("thm1-quadratic").unwrap();
    let q = Quadratics::from_config(&cfg);
    // weighted target mean (1, 0.2) lies in the box, so x* is that point
    let x_star = centre(&q.targets);
    assert!(x_star.iter().all(|v| v.abs() <= 1.0));
    let f_star = q.value(&x_star);
    let n = q.n();
    let l = 2.0;
    let d = 8f64.sqrt();
    let lambda0 = cfg.schedule.lambda0;

    let mut fed = federation(&cfg);
    let mut worst = f64::INFINITY;
    let mut worst_t = 0;
    for t in 1..=10_000usize {
        fed.advance().unwrap();
        let lambda = lambda0 * ((t + 1) as f64).sqrt();
        let xs = models(&fed);
        let c = centre(&xs);
        let surrogate = (0..xs.len()).map(|i| q.f(i, &xs[i])).sum::<f64>() / n
            + lambda / 2.0 * xs.iter().map(|x| sq_dist(x, &c)).sum::<f64>();
        let t1 = (t + 1) as f64;
        let bound = 2.0 * n * d * d * ((l / n) / t1 + lambda0 / t1.sqrt());
        let slack = bound + 1e-9 - (surrogate - f_star);
        if slack < worst {
            worst = slack;
            worst_t = t;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst >= 0.0 && elapsed < Duration::from_secs(5);
    report(
        2,
        pass,
        elapsed,
        format!("worst slack {worst:.3e} at t = {worst_t} over t <= 1e4"),
    );
    assert!(worst >= 0.0);
    assert!(elapsed < Duration::from_secs(5));
}

#[test]
fn criterion_03_convex_rate_slope() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = presets::load("thm1-quadratic").unwrap();
    let q = Quadratics::from_config(&cfg);
    let f_star = q.value(&centre(&q.targets));
    let mut fed = federation(&cfg);
    let mut pts = Vec::new();
    // x_bar^t is the average after t - 1 rounds
    for t in 1..=10_000usize {
        if t >= 100 {
            let r = q.value(&fed.state().x_bar) - f_star;
            pts.push(((t as f64).ln(), r.ln()));
        }
        fed.advance().unwrap();
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let elapsed = start.elapsed();
    let pass = slope <= -0.40 && slope.is_finite() && elapsed < Duration::from_secs(5);
    report(
        3,
        pass,
        elapsed,
        format!("log-log slope {slope:.4} over t in [1e2, 1e4] (need <= -0.40)"),
    );
    assert!(slope <= -0.40);
    assert!(elapsed < Duration::from_secs(5));
}

/// Surrogate gap over an l2 ball of radius `r`, computed from the models.
fn l2_surrogate_gap(q: &Quadratics, xs: &[Vec<f64>], lambda: f64, r: f64) -> f64 {
    let c = centre(xs);
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let g: Vec<f64> = q
                .grad(i, x)
                .iter()
                .zip(x.iter().zip(&c))
                .map(|(gk, (xk, ck))| gk / q.n() + lambda * (xk - ck))
                .collect();
            g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + r * g.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .sum()
}

#[test]
fn criterion_04_theorem2_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let base = presets::load("thm2-nonconvex").unwrap();
    let q = Quadratics::from_config(&base);
    let radius = 1.0;
    let (n, d, l, lambda0) = (q.n(), 2.0 * radius, 4.0, base.schedule.lambda0);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut min_gaps = Vec::new();
    let mut lowest = f64::INFINITY;
    for horizon in [100usize, 1000] {
        let mut cfg = base.clone();
        cfg.run.rounds = horizon;
        let mut fed = federation(&cfg);
        let e_hat = init_gap_estimate(fed.problem(), fed.global_set(), fed.state(), 1000).unwrap();
        let lambda = lambda0 * (horizon as f64).cbrt();
        let mut gaps = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            gaps.push(l2_surrogate_gap(&q, &models(&fed), lambda, radius));
            fed.advance().unwrap();
        }
        let h = horizon as f64;
        let bound =
            (e_hat + n * d * d * lambda0 / 2.0) / h.cbrt() + (l * d * d / 2.0) / h.powf(2.0 / 3.0);
        let mean = gaps.iter().sum::<f64>() / h;
        let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        lowest = lowest.min(min);
        ok &= mean <= bound;
        min_gaps.push(min);
        lines.push(format!(
            "T={horizon}: mean gap {mean:.4e} <= bound {bound:.4e} (E_hat {e_hat:.3e})"
        ));
    }
    let monotone = min_gaps[1] <= min_gaps[0];
    let elapsed = start.elapsed();
    let pass = ok && monotone && lowest >= -1e-9 && elapsed < Duration::from_secs(10);
    report(
        4,
        pass,
        elapsed,
        format!(
            "{}; min gap {:.3e} -> {:.3e}; lowest {lowest:.3e}",
            lines.join("; "),
            min_gaps[0],
            min_gaps[1]
        ),
    );
    assert!(ok && monotone && lowest >= -1e-9);
    assert!(elapsed < Duration::from_secs(10));
}

#[test]
fn criterion_05_stochastic_convergence() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let base = presets::load("thm3-sto").unwrap();
    assert_eq!(base.run.batch_size, Some(16));
    let reference = harness::reference_for(&base)
        .unwrap()
        .expect("convex problem");
    let mut early = Vec::new();
    let mut late = Vec::new();
    for seed in 0..10 {
        let mut cfg = base.clone();
        cfg.run.seed = seed;
        let mut fed = harness::prepare_with_reference(&cfg, Some(reference.clone()))
            .unwrap()
            .federation;
        assert_eq!(fed.problem().n(), 10);
        // x_bar^t is the average after t - 1 rounds
        fed.advance_by(99).unwrap();
        early.push(fed.problem().value(&fed.state().x_bar) - reference.value);
        fed.advance_by(9_900).unwrap();
        late.push(fed.problem().value(&fed.state().x_bar) - reference.value);
    }
    let (m_early, m_late) = (median(early), median(late));
    let elapsed = start.elapsed();
    let pass = m_late < m_early / 3.0 && elapsed < Duration::from_secs(60);
    report(
        5,
        pass,
        elapsed,
        format!(
            "median residual t=1e2 {m_early:.4e}, t=1e4 {m_late:.4e} (ratio {:.3}, need < 1/3); reference gap {:.1e}",
            m_late / m_early,
            reference.gap
        ),
    );
    assert!(m_late < m_early / 3.0);
    assert!(elapsed < Duration::from_secs(60));
}

#[test]
fn criterion_06_partial_participation() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let base = presets::load("pp-sweep").unwrap();
    let problem = Problem::counterexample();
    let lambda0 = base.schedule.lambda0;
    let build = |regime, p: f64| {
        Federation::builder(problem.clone(), box1())
            .schedule(Schedule::new(regime, lambda0).unwrap())
            .participation(ParticipationPolicy::new(p, 11).unwrap())
            .init(Vector::zeros(1))
            .build()
            .unwrap()
    };
    let mut full = build(Regime::ConvexT1, 1.0);
    let mut partial = build(Regime::PartialConvex { participation: 1.0 }, 1.0);
    let mut max_diff = 0.0f64;
    for _ in 0..base.run.rounds {
        full.advance().unwrap();
        partial.advance().unwrap();
        for (a, b) in models(&full).iter().zip(models(&partial)) {
            max_diff = max_diff.max(
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max),
            );
        }
    }

    let outcomes = harness::sweep(&base, None).unwrap();
    let mut ok = max_diff <= 1e-12;
    let mut lines = Vec::new();
    for l0 in &base.sweep.as_ref().unwrap().lambda0 {
        let med: Vec<f64> = [0.2, 0.5, 1.0]
            .iter()
            .map(|p| {
                median(
                    outcomes
                        .iter()
                        .filter(|o| o.cell.lambda0 == *l0 && o.cell.participation == *p)
                        .map(|o| o.result.as_ref().unwrap().final_residual.unwrap())
                        .collect(),
                )
            })
            .collect();
        ok &= med[1] <= med[0] && med[2] <= med[1];
        lines.push(format!(
            "lambda0={l0}: {:.4e} >= {:.4e} >= {:.4e}",
            med[0], med[1], med[2]
        ));
    }
    let elapsed = start.elapsed();
    let pass = ok && elapsed < Duration::from_secs(10);
    report(
        6,
        pass,
        elapsed,
        format!(
            "p=1 max diff {max_diff:e}; medians by p=0.2,0.5,1: {}",
            lines.join("; ")
        ),
    );
    assert!(ok);
    assert!(elapsed < Duration::from_secs(10));
}

fn is_vertex(set: &FeasibleSet, s: &[f64]) -> bool {
    let tol = 1e-12;
    match set.kind() {
        SetKind::L1Ball { radius } => {
            s.iter().filter(|v| **v != 0.0).count() == 1
                && s.iter().any(|v| (v.abs() - radius).abs() <= tol)
        }
        SetKind::L2Ball { radius } => {
            (s.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).abs() <= tol
        }
        SetKind::Box { lo, hi } => s
            .iter()
            .zip(lo.iter().zip(hi.iter()))
            .all(|(v, (l, h))| (v - l).abs() <= tol || (v - h).abs() <= tol),
        SetKind::Simplex { scale } => {
            s.iter().filter(|v| **v != 0.0).count() == 1
                && s.iter().any(|v| (v - scale).abs() <= tol)
        }
    }
}

#[test]
fn criterion_07_lmo_oracle_equivalence() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dim = 5;
    let sets = [
        FeasibleSet::l1_ball(dim, 1.5).unwrap(),
        FeasibleSet::l2_ball(dim, 0.7).unwrap(),
        FeasibleSet::boxed(
            vec![-1.0, 0.0, -2.0, 0.5, -0.3],
            vec![1.0, 2.0, -1.0, 0.75, 0.3],
        )
        .unwrap(),
        FeasibleSet::simplex(dim, 2.0).unwrap(),
    ];
    let mut worst = f64::INFINITY;
    let mut vertices = true;
    for (k, set) in sets.iter().enumerate() {
        let mut rng = stream(2024, k, 0, Purpose::Sampling);
        let points: Vec<Vector> = (0..100_000).map(|_| set.sample(&mut rng)).collect();
        assert!(points.iter().all(|p| set.contains(p, 1e-12)));
        for _ in 0..1000 {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let s = set.lmo(&g).unwrap();
            let at_s: f64 = g.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
            let best = points
                .iter()
                .map(|u| g.iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            worst = worst.min(best + 1e-9 - at_s);
            vertices &= is_vertex(set, &s) && set.contains(&s, 1e-12);
        }
    }
    let elapsed = start.elapsed();
    let pass = worst >= 0.0 && vertices && elapsed < Duration::from_secs(5);
    report(7, pass, elapsed, format!("4 set kinds x 1000 gradients x 1e5 points: worst slack {worst:.3e}; vertices ok = {vertices}"));
    assert!(worst >= 0.0 && vertices);
    assert!(elapsed < Duration::from_secs(5));
}

#[test]
fn criterion_08_estimator_variance_decay() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = presets::load("thm3-sto").unwrap();
    let problem = cfg.build_problem().unwrap();
    let n = problem.n();
    let schedule = Schedule::new(Regime::StoT3, cfg.schedule.lambda0).unwrap();
    let set = cfg.build_set(problem.dim()).unwrap();
    let x = set.lmo(&Vector::zeros(problem.dim())).unwrap();
    let targets: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            problem
                .client(i)
                .grad(&x)
                .iter()
                .map(|g| g / n as f64)
                .collect()
        })
        .collect();
    let error = |d: &[Vec<f64>]| {
        d.iter()
            .zip(&targets)
            .map(|(a, b)| sq_dist(a, b))
            .sum::<f64>()
            .sqrt()
    };
    let mut at10 = Vec::new();
    let mut at1000 = Vec::new();
    for seed in 0..10 {
        let oracle = StochasticOracle::new(16, seed).unwrap();
        let mut d = vec![vec![0.0; problem.dim()]; n];
        for t in 1..=1000usize {
            let rho = schedule.eval(t).rho.unwrap();
            for (i, di) in d.iter_mut().enumerate() {
                let g = oracle.stochastic_grad(problem.client(i), i, &x, t).unwrap();
                update_estimator(di, &g, n, rho);
            }
            if t == 10 {
                at10.push(error(&d));
            }
        }
        at1000.push(error(&d));
    }
    let (m10, m1000) = (median(at10), median(at1000));
    let elapsed = start.elapsed();
    let pass = m1000 < m10 && elapsed < Duration::from_secs(2);
    report(
        8,
        pass,
        elapsed,
        format!("median ||d - grad/n|| at t=10 {m10:.4e}, t=1e3 {m1000:.4e}"),
    );
    assert!(m1000 < m10);
    assert!(elapsed < Duration::from_secs(2));
}

#[test]
fn criterion_09_lambda0_ablation() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let base = presets::load("pp-sweep").unwrap();
    let first_gap = |l0: f64| {
        let mut cfg = base.with_cell(l0, base.run.participation, base.run.seed);
        cfg.run.rounds = 1;
        harness::run_in_memory(&cfg).unwrap().rows[1]
            .metrics
            .surrogate_gap
    };
    let (small, large) = (first_gap(1e-3), first_gap(1e-2));
    // after one round X = (1, -1) and the gap is 2 lambda_1 = 2 sqrt(2) lambda0
    let expect = |l0: f64| 2.0 * 2f64.sqrt() * l0;
    let elapsed = start.elapsed();
    let pass = large > small;
    report(
        9,
        pass,
        elapsed,
        format!(
            "round-1 surrogate gap lambda0=1e-3: {small:.4e} (closed form {:.4e}), lambda0=1e-2: {large:.4e} (closed form {:.4e})",
            expect(1e-3),
            expect(1e-2)
        ),
    );
    assert!(large > small);
    assert!((small - expect(1e-3)).abs() < 1e-12 && (large - expect(1e-2)).abs() < 1e-12);
}

#[test]
fn criterion_10_determinism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for p in presets::PRESETS {
        let cfg = presets::load(p.name).unwrap();
        let run = |tag: &str, workers: usize| {
            let mut c = cfg.clone();
            c.run.workers = workers;
            let out = dir.path().join(format!("{}-{tag}", p.name));
            harness::run_to_dir(&c, &out).unwrap();
            std::fs::read(out.join("metrics.csv")).unwrap()
        };
        let a = run("a", 1);
        if a != run("b", 1) || a != run("c", 4) {
            mismatched.push(p.name);
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatched.is_empty();
    report(
        10,
        pass,
        elapsed,
        format!(
            "{} presets x (workers 1, 1, 4): mismatches {mismatched:?}",
            presets::PRESETS.len()
        ),
    );
    assert!(mismatched.is_empty());
}
