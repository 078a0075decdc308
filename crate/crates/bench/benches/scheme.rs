use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kinetic_em::brownian::{coarsen, sample_path, GridSpec};
use kinetic_em::drift::{mollify, DriftSpec};
use kinetic_em::integrator::{integrate, substep_integrals, SchemeConfig};
use kinetic_em::state::PhaseState;

fn sampler(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_path");
    for n in [256u64, 4096] {
        let grid = GridSpec::unit(n, 1).unwrap();
        g.throughput(Throughput::Elements(n));
        g.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, grid| {
            b.iter(|| sample_path(*grid, 1, black_box(7)).unwrap())
        });
    }
    g.finish();

    let path = sample_path(GridSpec::unit(4096, 1).unwrap(), 1, 0).unwrap();
    c.bench_function("coarsen_4096_to_64", |b| b.iter(|| coarsen(black_box(&path), 64).unwrap()));
}

fn drift_eval(c: &mut Criterion) {
    let z = PhaseState::scalar(0.3, -0.2);
    let mut g = c.benchmark_group("mollified_eval");
    for drift in [
        DriftSpec::SignVelocity,
        DriftSpec::LinearFriction { gamma: 1.0 },
        DriftSpec::OscillatorySingular { kappa: 3.0, beta: 0.2 },
    ] {
        let md = mollify(&drift, 256, 0.5).unwrap();
        g.bench_function(drift.id(), |b| b.iter(|| md.evaluate(black_box(&z)).unwrap()));
    }
    g.finish();
}

fn substeps(c: &mut Criterion) {
    let z = PhaseState::scalar(0.3, 0.9);
    let mut g = c.benchmark_group("substep_integrals");
    for drift in [DriftSpec::SignVelocity, DriftSpec::OscillatorySingular { kappa: 3.0, beta: 0.2 }] {
        let md = mollify(&drift, 64, 0.5).unwrap();
        g.bench_function(drift.id(), |b| b.iter(|| substep_integrals(&md, black_box(&z), 1.0 / 64.0, 8).unwrap()));
    }
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrate");
    for n in [64u64, 1024] {
        let grid = GridSpec::unit(n, 1).unwrap();
        let path = sample_path(grid, 3, 0).unwrap();
        let cfg = SchemeConfig::new(grid, 0.5);
        let md = mollify(&DriftSpec::SignVelocity, n, 0.5).unwrap();
        g.throughput(Throughput::Elements(n));
        g.bench_with_input(BenchmarkId::new("sign_velocity", n), &path, |b, path| {
            b.iter(|| integrate(&cfg, &md, black_box(path)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sampler, drift_eval, substeps, trajectories);
criterion_main!(benches);
