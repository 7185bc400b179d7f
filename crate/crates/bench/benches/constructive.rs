use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use wmmse_learn::constructive::{build_div_net, build_wmmse_net, AdmissibleSet, WmmseNetConfig};

fn graphs(c: &mut Criterion) {
    let div = build_div_net(1.0, 1.0, 12).unwrap();
    c.bench_function("div_net/eval/n12", |b| b.iter(|| div.eval(black_box(0.3), black_box(0.7))));

    let adm = AdmissibleSet {
        num_users: 2,
        h_min: 0.5,
        h_max: 1.0,
        v_min: 0.5,
        p_max: 1.0,
        sigma: 1.0,
        alpha_min: 1.0,
        alpha_max: 1.0,
    };
    let cfg = WmmseNetConfig::new(adm, 2, 16);
    c.bench_function("wmmse_net/build/k2_t2_n16", |b| b.iter(|| build_wmmse_net(black_box(&cfg)).unwrap()));
    let net = build_wmmse_net(&cfg).unwrap();
    let inst = adm.sample(1, 2, &cfg.weights, 1).unwrap().remove(0);
    c.bench_function("wmmse_net/eval/k2_t2_n16", |b| b.iter(|| net.eval(black_box(&inst), None).unwrap()));
}

criterion_group!(benches, graphs);
criterion_main!(benches);
