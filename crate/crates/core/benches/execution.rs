use std::sync::Arc;

use adastep::analysis::montecarlo::RunBatch;
use adastep::oracle::{GradientOracle, NoiseModel};
use adastep::parallel::Execution;
use adastep::problems::make_quadratic;
use adastep::stepsize::StepsizeConfig;
use adastep::Vector;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn batch(execution: Execution, n_seeds: u64) -> RunBatch {
    let eig: Vec<f64> = (1..=10).map(f64::from).collect();
    let objective = Arc::new(make_quadratic(10, &eig, &Vector::zeros(10), 1).unwrap());
    RunBatch {
        oracle: GradientOracle::new(objective, NoiseModel::BoundedSphere { radius: 1.0 }).unwrap(),
        stepsize: StepsizeConfig::GlobalAdagrad { alpha: 0.01, beta: 1.0, epsilon: 0.0 },
        x0: Vector::filled(10, 0.5).unwrap(),
        horizon: 2_000,
        seeds: (0..n_seeds).collect(),
        execution,
    }
}

fn seed_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(20);
    for n_seeds in [8u64, 64] {
        for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let b = batch(execution, n_seeds);
            group.bench_with_input(BenchmarkId::new(label, n_seeds), &b, |bench, b| {
                bench.iter(|| b.run().unwrap().len())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, seed_sweep);
criterion_main!(benches);
