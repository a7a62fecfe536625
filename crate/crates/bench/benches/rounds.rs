use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fedfw_core::harness::{prepare, presets};
use fedfw_core::metrics::measure;

fn rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("round");
    for name in ["counterexample", "thm3-sto"] {
        let mut cfg = presets::load(name).unwrap();
        cfg.metrics.reference_iterations = 0;
        group.bench_function(format!("{name}/advance"), |b| {
            b.iter_batched_ref(
                || prepare(&cfg).unwrap().federation,
                |fed| fed.advance().unwrap(),
                BatchSize::SmallInput,
            )
        });
        let fed = prepare(&cfg).unwrap().federation;
        group.bench_function(format!("{name}/measure"), |b| {
            b.iter(|| measure(&fed, 0, 0.0, 1.0, None, fed.problem().n()).unwrap())
        });
    }
    group.finish();
}

fn workers(c: &mut Criterion) {
    let mut group = c.benchmark_group("thm3-sto/100_rounds");
    group.sample_size(10);
    for w in [1, 4] {
        let mut cfg = presets::load("thm3-sto").unwrap();
        cfg.metrics.reference_iterations = 0;
        cfg.run.workers = w;
        group.bench_function(format!("workers_{w}"), |b| {
            b.iter_batched(
                || prepare(&cfg).unwrap().federation,
                |mut fed| fed.advance_by(100).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, rounds, workers);
criterion_main!(benches);
