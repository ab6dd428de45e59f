//! Test-side oracles, written independently of the library's solvers.
#![allow(dead_code)]

use nsrl_core::env::{generate_phase_pair, EnvironmentSchedule, PhasePair};
use nsrl_core::mdp::MdpSnapshot;
use nsrl_core::rng::env_stream;

/// Stationary distribution of a row-stochastic `n×n` matrix by power
/// iteration on the lazy chain `(I + P)/2`, which has the same fixed point
/// and is aperiodic.
pub fn lazy_power_stationary(p: &[f64], n: usize) -> Vec<f64> {
    let mut d = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..2_000_000 {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            for j in 0..n {
                next[j] += d[i] * 0.5 * (p[i * n + j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let change: f64 = d.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut d, &mut next);
        if change < 1e-14 {
            break;
        }
    }
    d
}

/// Gain of the deterministic policy `actions` (one action per state).
pub fn deterministic_gain(m: &MdpSnapshot, actions: &[usize]) -> f64 {
    let n = m.n_states();
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        p[s * n..(s + 1) * n].copy_from_slice(m.transition_row(s, actions[s]));
    }
    let d = lazy_power_stationary(&p, n);
    (0..n).map(|s| d[s] * m.reward(s, actions[s])).sum()
}

/// `max` over all `|A|^|S|` deterministic policies.
pub fn brute_force_gain(m: &MdpSnapshot) -> f64 {
    let (ns, na) = (m.n_states(), m.n_actions());
    let mut actions = vec![0usize; ns];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(deterministic_gain(m, &actions));
        let mut i = 0;
        loop {
            if i == ns {
                return best;
            }
            actions[i] += 1;
            if actions[i] < na {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
    }
}

/// `max_{s,a} Σ_{s'} |P − Q|`.
pub fn row_l1_distance(a: &MdpSnapshot, b: &MdpSnapshot) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..a.n_states() {
        for act in 0..a.n_actions() {
            let d: f64 = a
                .transition_row(s, act)
                .iter()
                .zip(b.transition_row(s, act))
                .map(|(x, y)| (x - y).abs())
                .sum();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn elementwise_distance(a: &MdpSnapshot, b: &MdpSnapshot) -> f64 {
    a.transitions()
        .iter()
        .zip(b.transitions())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn reward_distance(a: &MdpSnapshot, b: &MdpSnapshot) -> f64 {
    a.rewards()
        .iter()
        .zip(b.rewards())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn phases(n_states: usize, n_actions: usize, seed: u64) -> PhasePair {
    generate_phase_pair(n_states, n_actions, &mut env_stream(seed)).unwrap()
}

/// Transition variation per step in the headline experiment: 303 over 2.5e5 steps.
pub const HEADLINE_DELTA_P_RATE: f64 = 303.0 / 2.5e5;

/// Headline setting scaled to horizon `t`: 50 states, 4 actions, periodic
/// switching with the switch count chosen so that `Δ_P / T` matches the
/// headline rate.
pub fn scaled_headline(t: usize, seed: u64) -> EnvironmentSchedule {
    let pair = phases(50, 4, seed);
    let per_switch = row_l1_distance(pair.phase_a(), pair.phase_b());
    let k = (HEADLINE_DELTA_P_RATE * t as f64 / per_switch).round() as usize;
    EnvironmentSchedule::periodic(pair, t, k.max(1), false).unwrap()
}

/// Same phases as [`scaled_headline`] but a fixed number of switches.
pub fn headline_with_switches(t: usize, k: usize, seed: u64) -> EnvironmentSchedule {
    EnvironmentSchedule::periodic(phases(50, 4, seed), t, k, false).unwrap()
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
