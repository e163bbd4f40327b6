use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lingrowth::datum::Datum;
use lingrowth::discretize::{energy_with, Grid};
use lingrowth::geometry::Domain;
use lingrowth::integrand::{mollify, Integrand};
use lingrowth::par::Exec;
use lingrowth::solver::{solve_regularized_from, SolverOptions};
use lingrowth::verify::trace_suite;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_energy(c: &mut Criterion) {
    let grid = Arc::new(Grid::new(Domain::parse("square").unwrap(), 128).unwrap());
    let f = Datum::parse("bump").unwrap().sample(&grid).unwrap();
    let w = Datum::parse("sine").unwrap().sample(&grid).unwrap();
    let phi = mollify(&Integrand::euclidean(2).unwrap(), 0.01, 8).unwrap();
    let mut group = c.benchmark_group("energy_128x128");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| energy_with(black_box(&w), &f, &phi, 0.1, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_newton(c: &mut Criterion) {
    let grid = Arc::new(Grid::new(Domain::parse("square").unwrap(), 32).unwrap());
    let f = Datum::parse("bump").unwrap().sample(&grid).unwrap();
    let phi = mollify(&Integrand::euclidean(2).unwrap(), 0.05, 8).unwrap();
    let mut group = c.benchmark_group("newton_32x32");
    group.sample_size(10);
    for (name, exec) in MODES {
        let options = SolverOptions {
            tol: 1e-8,
            exec,
            ..SolverOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_regularized_from(&f, &f, &phi, 0.1, &options).unwrap())
        });
    }
    group.finish();
}

fn bench_trace(c: &mut Criterion) {
    let mut group = c.benchmark_group("trace_suite");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| trace_suite(6, 200, 1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_energy, bench_newton, bench_trace);
criterion_main!(benches);
