use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use num_complex::Complex64;

use ris_bamp::harness::{monte_carlo, ExperimentSpec};
use ris_bamp::{denoise, run, GaussianMsg, PriorKind, Scheme};
use ris_bamp_bench::{desk_fixture, fixed_iterations};

fn outer_iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("ten_iterations");
    group.sample_size(20);
    for scheme in [Scheme::Bamp, Scheme::Butamp] {
        for t in [64usize, 128, 256] {
            let (obs, side, cfg) = desk_fixture(t, 0).expect("fixture");
            let mut cfg = fixed_iterations(&cfg, 10);
            cfg.scheme = scheme;
            group.throughput(Throughput::Elements(t as u64));
            group.bench_with_input(BenchmarkId::new(format!("{scheme:?}"), t), &t, |b, _| {
                b.iter(|| run(black_box(&obs), &side, &cfg))
            });
        }
    }
    group.finish();
}

fn denoisers(c: &mut Criterion) {
    let priors = [
        ("gaussian", PriorKind::standard_gaussian()),
        ("bernoulli_gaussian", PriorKind::sparse(0.25)),
        ("qpsk", PriorKind::qpsk()),
    ];
    let msgs: Vec<GaussianMsg> = (0..1024)
        .map(|i| {
            let a = i as f64 * 0.37;
            GaussianMsg::new(Complex64::new(a.sin(), a.cos()), 0.1 + (i % 7) as f64 * 0.2)
        })
        .collect();
    let mut group = c.benchmark_group("denoise_1024");
    group.throughput(Throughput::Elements(msgs.len() as u64));
    for (name, prior) in &priors {
        group.bench_function(*name, |b| {
            b.iter(|| {
                msgs.iter()
                    .map(|m| denoise(prior, *m).expect("finite").mean.re)
                    .sum::<f64>()
            })
        });
    }
    group.finish();
}

fn small_sweep(c: &mut Criterion) {
    let mut spec = ExperimentSpec::desk(vec![10.0, 30.0], 2);
    spec.bamp.max_iters = 20;
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("two_points_two_trials", |b| b.iter(|| monte_carlo(black_box(&spec))));
    group.finish();
}

criterion_group!(benches, outer_iterations, denoisers, small_sweep);
criterion_main!(benches);
