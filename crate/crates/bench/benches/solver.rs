use std::hint::black_box;

use bulkvac::presets::{example_model, sweep_model, VacationSchedule};
use bulkvac::solver::KernelSet;
use bulkvac::{simulate, solve, Policy, SimOptions, SolverOptions};
use criterion::{criterion_group, criterion_main, Criterion};

fn solver(c: &mut Criterion) {
    let opts = SolverOptions::default();
    for policy in [Policy::Sv, Policy::Mv] {
        let model = example_model(policy);
        c.bench_function(&format!("solve/example_{policy}"), |b| b.iter(|| solve(black_box(&model), &opts).unwrap()));
    }
    let sweep = sweep_model(2.0, VacationSchedule::QueueDependent, Policy::Sv).unwrap();
    c.bench_function("solve/sweep_l2", |b| b.iter(|| solve(black_box(&sweep), &opts).unwrap()));
}

fn kernels(c: &mut Criterion) {
    let model = example_model(Policy::Sv);
    let opts = SolverOptions::default();
    c.bench_function("kernel_coefficients/example", |b| {
        b.iter(|| KernelSet::new(black_box(&model), opts.coeff_cap, opts.coeff_target).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let model = example_model(Policy::Sv);
    let opts = SimOptions { events: 200_000, ..SimOptions::default() };
    let mut g = c.benchmark_group("simulate");
    g.sample_size(20);
    g.bench_function("example_2e5_events", |b| b.iter(|| simulate(black_box(&model), &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, solver, kernels, simulation);
criterion_main!(benches);
