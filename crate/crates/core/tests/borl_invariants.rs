mod common;

use rand::Rng;

use nsrl_core::borl::{arm_grid, run_borl, run_borl_observed, BorlParams, Exp3P};
use nsrl_core::env::EnvironmentSchedule;
use nsrl_core::nac::LearnerView;
use nsrl_core::rng::stream;

use common::*;

#[test]
fn run_probabilities_valid_every_epoch() {
    let schedule = EnvironmentSchedule::periodic(phases(5, 3, 2), 20_000, 10, false).unwrap();
    let params = BorlParams::defaults(20_000, None, 1.0).unwrap();
    let trace = run_borl(&params, &schedule, 3).unwrap();
    let k = arm_grid(20_000).unwrap().len();
    assert_eq!(trace.len(), 20_000);
    assert_eq!(trace.epochs.iter().map(|e| e.steps).sum::<usize>(), 20_000);
    for e in &trace.epochs {
        assert!((e.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(e.probs.iter().all(|&p| p >= params.zeta / k as f64 - 1e-15));
        let start = e.epoch * params.epoch_len;
        assert!(trace.records[start..start + e.steps]
            .iter()
            .all(|r| r.arm == Some(e.arm)));
    }
}

#[test]
fn learner_is_fresh_each_epoch() {
    let schedule = EnvironmentSchedule::periodic(phases(3, 2, 8), 1000, 4, false).unwrap();
    let params = BorlParams::defaults(1000, Some(100), 1.0).unwrap();
    let mut starts = 0;
    let mut check = |v: LearnerView<'_>| {
        if v.t.is_multiple_of(100) {
            assert_eq!(v.state.segment, 0);
            assert_eq!(v.state.step_in_segment, 0);
            assert!(v.state.q_table.iter().all(|&q| q == 0.0) && v.state.eta == 0.0);
            starts += 1;
        }
    };
    run_borl_observed(&params, &schedule, 1, &mut check).unwrap();
    assert_eq!(starts, 10);
}

#[test]
fn zero_rewards_keep_uniform() {
    // Epoch rewards at the lower bound rescale to zero.
    let (k, w) = (5, 40);
    let mut master = Exp3P::new(k, 0.3, 0.2, 0.1, 1.0).unwrap();
    let mut rng = stream(5);
    for _ in 0..300 {
        let p = master.probs();
        assert!(p.iter().all(|x| (x - 1.0 / k as f64).abs() <= 1e-9));
        let arm = Exp3P::sample(&p, &mut rng);
        master.update(&p, arm, -(w as f64), w).unwrap();
    }
}

#[test]
fn weights_never_decrease() {
    let (k, w) = (4, 25);
    let mut master = Exp3P::new(k, 0.1, 0.05, 0.2, 1.0).unwrap();
    let mut rng = stream(6);
    for _ in 0..500 {
        let before = master.weights().to_vec();
        let p = master.probs();
        let arm = Exp3P::sample(&p, &mut rng);
        master
            .update(&p, arm, rng.random_range(-1.0..1.0) * w as f64, w)
            .unwrap();
        assert!(master.weights().iter().zip(&before).all(|(a, b)| a >= b));
    }
}

/// Arms with identical reward distributions are pulled uniformly on
/// average over seeds (3σ multinomial interval).
#[test]
fn identical_arms_pulled_uniformly() {
    const EPOCHS: usize = 200;
    const SEEDS: u64 = 200;
    let (k, w) = (4usize, 50usize);
    let e = EPOCHS as f64;
    let mut counts = vec![0usize; k];
    for seed in 0..SEEDS {
        let mut master = Exp3P::new(k, 0.95 / e.sqrt(), 1.0 / e.sqrt(), 0.3, 1.0).unwrap();
        let mut rng = stream(7_000 + seed);
        for _ in 0..EPOCHS {
            let p = master.probs();
            let arm = Exp3P::sample(&p, &mut rng);
            let reward: f64 = (0..w).map(|_| rng.random_range(0.0..1.0)).sum();
            master.update(&p, arm, reward, w).unwrap();
            counts[arm] += 1;
        }
    }
    let n = (EPOCHS as u64 * SEEDS) as f64;
    let p = 1.0 / k as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    for (j, c) in counts.iter().enumerate() {
        let freq = *c as f64 / n;
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "arm {j}: {freq} (3σ = {})",
            3.0 * sigma
        );
    }
}

#[test]
fn grid_covers_every_budget() {
    let mut rng = stream(8);
    for t in [3usize, 10, 1000, 20_000, 1_000_000] {
        let grid = arm_grid(t).unwrap();
        let factor = (t as f64).powf(1.0 / ((t as f64).ln().floor().max(1.0)));
        let mut budgets: Vec<f64> = (0..200).map(|_| (t as f64).powf(rng.random_range(0.0..1.0))).collect();
        budgets.extend([1.0, t as f64]);
        for delta in budgets {
            let covered = grid
                .iter()
                .any(|&g| (g / delta).max(delta / g) <= factor * (1.0 + 1e-12));
            assert!(covered, "T = {t}, Δ = {delta}");
        }
    }
}

#[test]
fn deterministic_per_seed() {
    let schedule = EnvironmentSchedule::periodic(phases(3, 2, 1), 5000, 5, false).unwrap();
    let params = BorlParams::defaults(5000, None, 1.0).unwrap();
    let a = run_borl(&params, &schedule, 2).unwrap();
    assert_eq!(a, run_borl(&params, &schedule, 2).unwrap());
    assert_ne!(a.records, run_borl(&params, &schedule, 3).unwrap().records);
}
