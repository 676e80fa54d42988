use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use edgegov_bench::{full_grid, quiet_profile};
use edgegov_core::{
    efficiency, fit, optimize, simulate_stream, sweep, Control, GovernorPolicy, Khz, StreamSpec,
};

fn optimizer(c: &mut Criterion) {
    let profile = quiet_profile();
    let stream = StreamSpec::new(1.0, 810.0).unwrap();
    c.bench_function("optimize/builtin", |b| b.iter(|| optimize(&profile, black_box(&stream)).unwrap()));

    let model = fit(&full_grid(1)).unwrap();
    c.bench_function("optimize/fitted", |b| b.iter(|| optimize(&model, black_box(&stream)).unwrap()));

    let ds: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let ks: Vec<f64> = (0..50).map(|i| i as f64 * 20.0).collect();
    c.bench_function("sweep/20x50", |b| b.iter(|| sweep(&model, &ds, &ks).unwrap()));
}

fn modeling(c: &mut Criterion) {
    c.bench_function("fit/13x11x5", |b| {
        b.iter_batched(|| full_grid(5), |records| fit(&records).unwrap(), BatchSize::SmallInput)
    });
    let model = fit(&full_grid(1)).unwrap();
    c.bench_function("efficiency/13x11", |b| b.iter(|| efficiency(black_box(&model)).unwrap()));
}

fn simulator(c: &mut Criterion) {
    let profile = quiet_profile();
    let stream = StreamSpec::new(0.1, 81.0).unwrap();
    let fixed = Control::Fixed(profile.ladder().config(Khz::from_mhz(900)).unwrap());
    c.bench_function("simulate/fixed/10k", |b| {
        b.iter(|| simulate_stream(&profile, fixed, &stream, 10_000, 0).unwrap())
    });
    let ondemand = Control::Governor(GovernorPolicy::ondemand());
    c.bench_function("simulate/ondemand/10k", |b| {
        b.iter(|| simulate_stream(&profile, ondemand, &stream, 10_000, 0).unwrap())
    });
}

criterion_group!(benches, optimizer, modeling, simulator);
criterion_main!(benches);
