use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ctp_core::{build, solve, AlmConfig, BuiltinProblemId};
use std::hint::black_box;

fn alm(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for id in [BuiltinProblemId::Tracking, BuiltinProblemId::Example2] {
        let p = build(id);
        for n in [200, 1000] {
            let config = AlmConfig {
                n_nodes: n,
                ..AlmConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(id.as_str(), n), &n, |b, _| {
                b.iter(|| solve(black_box(&p), &config).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, alm);
criterion_main!(benches);
