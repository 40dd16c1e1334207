use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plap_bench::{disk_torsion, radial_finite};
use plap_core::{default_schedule, energy_gradient, estimate_m, run_sweep, solve_p, Field, SolveParams, SweepOptions, ThresholdOptions};
use std::hint::black_box;

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    let (mesh, data) = radial_finite(200);
    for p in [1.5, 1.1] {
        group.bench_with_input(BenchmarkId::new("radial_200", p), &p, |b, &p| {
            b.iter(|| solve_p(&mesh, &data, &SolveParams::new(p), None).unwrap())
        });
    }
    for refinement in [3, 5] {
        let (mesh, data) = disk_torsion(refinement, 2.0);
        group.bench_function(BenchmarkId::new("disk_p1.5", refinement), |b| {
            b.iter(|| solve_p(&mesh, &data, &SolveParams::new(1.5), None).unwrap())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let (mesh, data) = disk_torsion(6, 1.0);
    let u = Field::from_fn(&mesh, |x| 1.0 - x[0] * x[0] - 0.5 * x[1] * x[1]);
    let params = SolveParams::new(1.25);
    c.bench_function("gradient/disk_6", |b| b.iter(|| energy_gradient(&mesh, &data, black_box(&u), &params).unwrap()));
}

fn sweep(c: &mut Criterion) {
    let (mesh, data) = radial_finite(200);
    let schedule = default_schedule();
    let opts = SweepOptions::default();
    c.bench_function("sweep/radial_200", |b| b.iter(|| run_sweep(&mesh, &data, &schedule, &opts).unwrap()));
}

fn threshold(c: &mut Criterion) {
    let mut group = c.benchmark_group("threshold");
    group.sample_size(10);
    for refinement in [3, 5] {
        let (mesh, data) = disk_torsion(refinement, 0.5);
        group.bench_function(BenchmarkId::new("disk", refinement), |b| {
            b.iter(|| estimate_m(&mesh, &data, &ThresholdOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solve, gradient, sweep, threshold);
criterion_main!(benches);
