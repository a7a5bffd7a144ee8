use std::time::Duration;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use piconet_bench::field;
use piconet_core::{build_model, iterative_cluster, simulate_fer, solve_exact, FerParams, Objective};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_exact");
    group.sample_size(10);
    for n in [30, 40] {
        let model = build_model(&field(n, 1), Objective::Combined, 100.0, 10.0, 50.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &model, |b, m| {
            b.iter(|| solve_exact(black_box(m), Duration::from_secs(60)).unwrap())
        });
    }
    group.finish();
}

fn heuristic(c: &mut Criterion) {
    let inst = field(800, 1);
    c.bench_function("iterative_cluster/800", |b| b.iter(|| iterative_cluster(black_box(&inst), 10.0, 50.0)));
}

fn fer(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_fer");
    group.sample_size(10);
    for n in [5, 20] {
        let params = FerParams { n_clusters: n, slots: 2000, ..FerParams::default() };
        group.bench_with_input(BenchmarkId::from_parameter(n), &params, |b, p| b.iter(|| simulate_fer(black_box(p)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, exact, heuristic, fer);
criterion_main!(benches);
