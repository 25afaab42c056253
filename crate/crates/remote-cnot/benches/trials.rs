//! Parallel vs sequential throughput of the two hot loops: Monte Carlo
//! trial batches and exact process checks over a small noise grid.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;

use remote_cnot::devices::NoiseModel;
use remote_cnot::protocol::Protocol;
use remote_cnot::verify::{
    basis_input, ideal_cnot, process_check, run_trials_parallel, run_trials_sequential,
};

fn noisy_model() -> NoiseModel {
    NoiseModel {
        eta: Complex64::new(0.9, 0.0),
        zeta: Complex64::new(0.8, 0.1),
        delta: 0.3,
        k_plus: Complex64::new(0.15, 0.05),
        k_d: Complex64::new(0.2, -0.1),
        detector_efficiency: 0.95,
    }
}

fn bench_trials(c: &mut Criterion) {
    let noise = noisy_model();
    let protocol = Protocol::with_default_registers(noise).unwrap();
    let input = basis_input(1, 0);
    let reference = ideal_cnot(&input).unwrap();
    const TRIALS: u64 = 2_000;

    let mut group = c.benchmark_group("sampled_trials");
    group.bench_function("sequential", |b| {
        b.iter(|| {
            run_trials_sequential(&protocol, &input, &reference, 100, TRIALS, 1).unwrap()
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_trials_parallel(&protocol, &input, &reference, 100, TRIALS, 1).unwrap())
    });
    group.finish();
}

fn bench_process_check(c: &mut Criterion) {
    let grid: Vec<NoiseModel> = [0.6, 0.8, 1.0]
        .iter()
        .flat_map(|&eta| {
            [0.0, 0.3].iter().map(move |&delta| NoiseModel {
                eta: Complex64::new(eta, 0.0),
                delta,
                ..noisy_model()
            })
        })
        .collect();

    let mut group = c.benchmark_group("process_check_grid");
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || grid.clone(),
            |grid| {
                grid.iter()
                    .map(|n| process_check(n).unwrap().worst_fidelity)
                    .fold(1.0f64, f64::min)
            },
            BatchSize::SmallInput,
        )
    });
    group.bench_function("parallel", |b| {
        use rayon::prelude::*;
        b.iter_batched(
            || grid.clone(),
            |grid| {
                grid.par_iter()
                    .map(|n| process_check(n).unwrap().worst_fidelity)
                    .reduce(|| 1.0f64, f64::min)
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_trials, bench_process_check);
criterion_main!(benches);
