use std::sync::Arc;

use adastep::analysis::montecarlo::RunBatch;
use adastep::optimizer::{no_peeking_twin, replay, run, run_traced, RunConfig, Selector};
use adastep::oracle::{GradientOracle, NoiseModel};
use adastep::parallel::Execution;
use adastep::problems::{make_logistic, make_quadratic, make_smooth_nonconvex, Objective};
use adastep::stepsize::StepsizeConfig;
use adastep::Vector;
use proptest::prelude::*;

fn objective(kind: u8, dim: usize, seed: u64) -> Arc<Objective> {
    Arc::new(match kind % 3 {
        0 => {
            let eig: Vec<f64> = (0..dim).map(|i| 0.5 + i as f64).collect();
            make_quadratic(dim, &eig, &Vector::zeros(dim), seed).unwrap()
        }
        1 => make_logistic(dim, 40, seed % 100).unwrap(),
        _ => make_smooth_nonconvex(dim).unwrap(),
    })
}

fn stepsize(coordinate: bool, alpha: f64, beta: f64, epsilon: f64) -> StepsizeConfig {
    if coordinate {
        StepsizeConfig::CoordAdagrad { alpha, beta, epsilon }
    } else {
        StepsizeConfig::GlobalAdagrad { alpha, beta, epsilon }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_reconstructs_checkpoints_bit_exactly(
        kind in 0u8..3, dim in 1usize..5, seed in any::<u64>(),
        coordinate in any::<bool>(), horizon in 1u64..600, stride in 1u64..50,
    ) {
        let obj = objective(kind, dim, seed);
        let oracle = GradientOracle::new(obj.clone(), NoiseModel::Gaussian { sigma: 0.5 }).unwrap();
        let x0 = Vector::filled(dim, 0.8).unwrap();
        let step = stepsize(coordinate, 0.3, 1.0, 0.1);
        let cfg = RunConfig::new(oracle, step, x0.clone(), horizon, seed).with_record_stride(stride);
        let (traj, trace) = run_traced(&cfg).unwrap();
        let again = replay(obj, step, x0, &trace, stride, Vec::new()).unwrap();
        prop_assert_eq!(traj.checkpoints.len(), again.checkpoints.len());
        for (a, b) in traj.checkpoints.iter().zip(&again.checkpoints) {
            prop_assert_eq!(a.t, b.t);
            prop_assert_eq!(a.f_gap.to_bits(), b.f_gap.to_bits());
            prop_assert_eq!(a.grad_norm_sq.to_bits(), b.grad_norm_sq.to_bits());
            prop_assert_eq!(a.eta_min.to_bits(), b.eta_min.to_bits());
            prop_assert_eq!(a.liminf_stat.to_bits(), b.liminf_stat.to_bits());
        }
        prop_assert_eq!(traj.selections(), again.selections());
    }

    #[test]
    fn metrics_match_brute_force_recomputation(
        kind in 0u8..3, dim in 1usize..4, seed in any::<u64>(),
        coordinate in any::<bool>(), horizon in 1u64..1000, epsilon in 0.0f64..0.45,
    ) {
        let obj = objective(kind, dim, seed);
        let oracle = GradientOracle::new(obj.clone(), NoiseModel::BoundedSphere { radius: 0.3 }).unwrap();
        let x0 = Vector::filled(dim, -0.6).unwrap();
        let cfg = RunConfig::new(oracle, stepsize(coordinate, 0.2, 1.0, epsilon), x0.clone(), horizon, seed)
            .with_record_stride(1);
        let (traj, trace) = run_traced(&cfg).unwrap();
        prop_assert_eq!(traj.checkpoints.len() as u64, horizon);

        let mut x = x0.as_slice().to_vec();
        let mut sum = vec![0.0; dim];
        let mut liminf = f64::INFINITY;
        let mut best = f64::INFINITY;
        for (k, cp) in traj.checkpoints.iter().enumerate() {
            let t = (k + 1) as u64;
            prop_assert_eq!(cp.t, t);
            let gn = obj.grad(&x).unwrap().norm_sq();
            prop_assert!(close(cp.grad_norm_sq, gn), "t={t}: {} vs {gn}", cp.grad_norm_sq);
            prop_assert!(close(cp.f_gap, obj.gap(&x).unwrap()) || (cp.f_gap - obj.gap(&x).unwrap()).abs() < 1e-15);
            best = best.min(gn);
            liminf = liminf.min(gn * (t as f64).powf(0.5 - epsilon));
            prop_assert!(close(cp.liminf_stat, liminf), "t={t}: {} vs {liminf}", cp.liminf_stat);
            for (j, xj) in x.iter_mut().enumerate() {
                sum[j] += *xj;
                *xj -= trace.eta[k][j] * trace.gradients[k][j];
            }
        }
        let sel = traj.select(Selector::BestGradient).unwrap();
        prop_assert!(close(sel.grad_norm_sq, best));
        prop_assert!(traj.checkpoints.iter().all(|c| sel.grad_norm_sq <= c.grad_norm_sq));
        let avg = traj.select(Selector::Average).unwrap();
        for (a, s) in avg.x.as_slice().iter().zip(&sum) {
            prop_assert!((a - s / horizon as f64).abs() <= 1e-12);
        }
        let last = traj.select(Selector::Last).unwrap();
        prop_assert_eq!(last.t, Some(horizon));
    }

    #[test]
    fn delayed_stepsizes_never_peek(
        kind in 0u8..3, dim in 1usize..5, seed in any::<u64>(), coordinate in any::<bool>(),
        alpha in 0.01f64..1.0, beta in 0.1f64..5.0, epsilon in 0.0f64..0.45, fork_at in 1u64..60,
    ) {
        let obj = objective(kind, dim, seed);
        let oracle = GradientOracle::new(obj, NoiseModel::Gaussian { sigma: 1.0 }).unwrap();
        let x0 = Vector::filled(dim, 1.0).unwrap();
        let cfg = RunConfig::new(oracle.clone(), stepsize(coordinate, alpha, beta, epsilon), x0.clone(), fork_at, seed);
        let twin = no_peeking_twin(&cfg, fork_at).unwrap();
        prop_assert!(twin.g_a != twin.g_b);
        prop_assert!(twin.stepsize_blind_to_current_gradient());

        let biased = RunConfig::new(oracle, StepsizeConfig::BiasedGlobalAdagrad { alpha, beta, epsilon }, x0, fork_at, seed);
        prop_assert!(!no_peeking_twin(&biased, fork_at).unwrap().stepsize_blind_to_current_gradient());
    }

    #[test]
    fn identical_seeds_reproduce(seed in any::<u64>(), horizon in 1u64..500) {
        let obj = objective(2, 3, 0);
        let oracle = GradientOracle::new(obj, NoiseModel::BoundedSphere { radius: 1.0 }).unwrap();
        let cfg = RunConfig::new(oracle, stepsize(true, 0.3, 1.0, 0.2), Vector::filled(3, 0.5).unwrap(), horizon, seed);
        prop_assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }
}

#[test]
fn sequential_and_parallel_batches_agree() {
    let obj = objective(0, 5, 11);
    let batch = |execution| RunBatch {
        oracle: GradientOracle::new(obj.clone(), NoiseModel::Gaussian { sigma: 1.0 }).unwrap(),
        stepsize: stepsize(false, 0.1, 1.0, 0.0),
        x0: Vector::filled(5, 1.0).unwrap(),
        horizon: 2000,
        seeds: (0..32).rev().collect(),
        execution,
    };
    let a = batch(Execution::Sequential).run().unwrap();
    let b = batch(Execution::Parallel).run().unwrap();
    assert_eq!(a, b);
    assert!(a.windows(2).all(|w| w[0].info.seed < w[1].info.seed));
}

#[test]
fn stride_does_not_change_online_aggregates() {
    let obj = objective(2, 4, 0);
    let oracle = GradientOracle::new(obj, NoiseModel::BoundedSphere { radius: 0.5 }).unwrap();
    let base = RunConfig::new(oracle, stepsize(false, 0.3, 1.0, 0.25), Vector::filled(4, 1.0).unwrap(), 5000, 3);
    let dense = run(&base.clone().with_record_stride(1)).unwrap();
    let sparse = run(&base.with_record_stride(5000)).unwrap();
    assert_eq!(dense.selections(), sparse.selections());
    assert_eq!(dense.sums, sparse.sums);
    assert_eq!(dense.final_checkpoint(), sparse.final_checkpoint());
}
