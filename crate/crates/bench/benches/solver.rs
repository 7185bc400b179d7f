use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wmmse_learn::{sum_rate, wmmse, WmmseConfig};
use wmmse_learn_bench::ic_instances;

fn solver(c: &mut Criterion) {
    let cfg = WmmseConfig::default();
    let mut g = c.benchmark_group("wmmse");
    for k in [2, 10, 30] {
        let inst = ic_instances(k, 16);
        g.bench_with_input(BenchmarkId::from_parameter(k), &inst, |b, inst| {
            b.iter(|| inst.iter().map(|i| wmmse(black_box(i), &cfg).unwrap().iterations).sum::<usize>())
        });
    }
    g.finish();

    let inst = ic_instances(30, 1).remove(0);
    let p = vec![0.5; 30];
    c.bench_function("sum_rate/30", |b| b.iter(|| sum_rate(black_box(&inst), black_box(&p)).unwrap()));
}

criterion_group!(benches, solver);
criterion_main!(benches);
