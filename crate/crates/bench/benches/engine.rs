use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slicesim::alloc::{water_fill, ShareRequest};
use slicesim::amount::Amount;
use slicesim::scenario;

fn fig6_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    for name in ["fig6", "fig6-shared"] {
        let doc = scenario::builtin(name).unwrap();
        group.bench_function(name, |b| b.iter(|| doc.run(black_box(7)).unwrap().trace.digest()));
    }
    group.finish();
}

fn water_filling(c: &mut Criterion) {
    let mut group = c.benchmark_group("water_fill");
    for n in [4usize, 32, 256] {
        let requests: Vec<ShareRequest> = (0..n)
            .map(|i| ShareRequest::new(Amount::from_int(10 + (i * 37 % 200) as i64), Amount::from_int(5), Amount::from_int(1 + (i % 3) as i64)))
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &requests, |b, r| b.iter(|| water_fill(Amount::from_int(100 * n as i64), black_box(r))));
    }
    group.finish();
}

criterion_group!(benches, fig6_run, water_filling);
criterion_main!(benches);
