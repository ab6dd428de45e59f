//! Optimal average reward of each environment and dynamic regret.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::env::{EnvironmentSchedule, SnapshotKey};
use crate::error::{Error, Result};
use crate::mdp::{evaluate_policy, MdpSnapshot, TabularPolicy};
use crate::trace::RunTrace;

const RVI_SPAN_TOL: f64 = 1e-9;
const RVI_MAX_ITERS: usize = 1_000_000;
/// Slack allowed on the gain LP constraints `J + h(s) ≥ r(s,a) + Σ P h`.
pub const LP_FEASIBILITY_TOL: f64 = 1e-7;
/// Largest `|S||A|` for which exhaustive policy enumeration is attempted.
pub const ENUMERATION_LIMIT: usize = 12;

/// Chunk length for warm-started solves along a gradual schedule.
const GRADUAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub j_star: f64,
    /// Greedy action per state, ties broken toward the lowest index.
    pub greedy: Vec<usize>,
    /// Relative values with `h(0) = 0`.
    pub bias: Vec<f64>,
}

impl OptimalSolution {
    pub fn greedy_policy(&self, n_actions: usize) -> TabularPolicy {
        TabularPolicy::deterministic(n_actions, &self.greedy)
    }
}

/// Bellman backup `max_a [r(s,a) + Σ P(s'|s,a) h(s')]` with its argmax.
fn backup(m: &MdpSnapshot, h: &[f64], out: &mut [f64], argmax: &mut [usize]) {
    for s in 0..m.n_states() {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for a in 0..m.n_actions() {
            let next: f64 = m.transition_row(s, a).iter().zip(h).map(|(p, x)| p * x).sum();
            let value = m.reward(s, a) + next;
            if value > best {
                best = value;
                best_a = a;
            }
        }
        out[s] = best;
        argmax[s] = best_a;
    }
}

/// Optimal gain by relative value iteration with reference state 0.
pub fn optimal_average_reward(m: &MdpSnapshot) -> Result<OptimalSolution> {
    optimal_average_reward_from(m, None)
}

/// As [`optimal_average_reward`], starting the iteration from `warm` if given.
pub fn optimal_average_reward_from(m: &MdpSnapshot, warm: Option<&[f64]>) -> Result<OptimalSolution> {
    let ns = m.n_states();
    let mut h = match warm {
        Some(w) if w.len() == ns => w.to_vec(),
        _ => vec![0.0; ns],
    };
    let mut next = vec![0.0; ns];
    let mut greedy = vec![0; ns];

    let mut converged = None;
    for _ in 0..RVI_MAX_ITERS {
        backup(m, &h, &mut next, &mut greedy);
        let offset = next[0];
        let (lo, hi) = next
            .iter()
            .zip(&h)
            .map(|(n, o)| n - o)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        for (dst, src) in h.iter_mut().zip(&next) {
            *dst = src - offset;
        }
        if !(hi - lo).is_finite() {
            break;
        }
        if hi - lo <= RVI_SPAN_TOL {
            converged = Some(offset);
            break;
        }
    }
    let j_star = converged.ok_or(Error::NoConvergence { t: None })?;

    // Certificate: (J*, h) must be feasible for the gain LP and the greedy
    // action must make its constraint tight.
    backup(m, &h, &mut next, &mut greedy);
    let worst = next
        .iter()
        .zip(&h)
        .map(|(b, x)| (b - x - j_star).abs())
        .fold(0.0, f64::max);
    if worst > LP_FEASIBILITY_TOL {
        return Err(Error::NoConvergence { t: None });
    }
    Ok(OptimalSolution {
        j_star,
        greedy,
        bias: h,
    })
}

/// Largest violation of `J + h(s) ≥ r(s,a) + Σ P h` over all `(s, a)`
/// (non-positive when feasible).
pub fn lp_violation(m: &MdpSnapshot, j: f64, h: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for s in 0..m.n_states() {
        for a in 0..m.n_actions() {
            let next: f64 = m.transition_row(s, a).iter().zip(h).map(|(p, x)| p * x).sum();
            worst = worst.max(m.reward(s, a) + next - j - h[s]);
        }
    }
    worst
}

/// Best average reward over all deterministic stationary policies.
/// Policies whose induced chain cannot be evaluated are skipped.
pub fn optimal_by_enumeration(m: &MdpSnapshot) -> Result<(f64, Vec<usize>)> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let count = (na as u64)
        .checked_pow(ns as u32)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| Error::InvalidParams(format!("{na}^{ns} policies is too many to enumerate")))?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut actions = vec![0usize; ns];
    for code in 0..count {
        let mut c = code;
        for a in actions.iter_mut() {
            *a = (c % na as u64) as usize;
            c /= na as u64;
        }
        let Ok(sol) = evaluate_policy(m, &TabularPolicy::deterministic(na, &actions)) else {
            continue;
        };
        if best.as_ref().is_none_or(|(j, _)| sol.avg_reward > *j) {
            best = Some((sol.avg_reward, actions.clone()));
        }
    }
    best.ok_or(Error::NonErgodic)
}

/// RVI, falling back to enumeration on small instances that fail to converge.
pub fn optimal_gain(m: &MdpSnapshot) -> Result<f64> {
    match optimal_average_reward(m) {
        Ok(sol) => Ok(sol.j_star),
        Err(Error::NoConvergence { .. }) if m.n_states() * m.n_actions() <= ENUMERATION_LIMIT => {
            optimal_by_enumeration(m).map(|(j, _)| j)
        }
        Err(e) => Err(e),
    }
}

/// `J*_t` for every step of the schedule.
pub fn benchmark_series(schedule: &EnvironmentSchedule) -> Result<Vec<f64>> {
    let horizon = schedule.horizon();
    let tag = |t: usize| {
        move |e: Error| match e {
            Error::NoConvergence { .. } => Error::NoConvergence { t: Some(t) },
            other => other,
        }
    };
    if schedule.is_piecewise_constant() {
        let mut memo: HashMap<SnapshotKey, f64> = HashMap::new();
        let mut series = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let key = schedule.snapshot_key(t)?;
            let j = match memo.get(&key) {
                Some(&j) => j,
                None => {
                    let j = optimal_gain(&schedule.env_at(t)?).map_err(tag(t))?;
                    memo.insert(key, j);
                    j
                }
            };
            series.push(j);
        }
        return Ok(series);
    }

    let chunks: Vec<(usize, usize)> = (0..horizon)
        .step_by(GRADUAL_CHUNK)
        .map(|s| (s, (s + GRADUAL_CHUNK).min(horizon)))
        .collect();
    let solved: Result<Vec<Vec<f64>>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut warm: Option<Vec<f64>> = None;
            let mut out = Vec::with_capacity(end - start);
            for t in start..end {
                let m = schedule.env_at(t)?;
                let j = match optimal_average_reward_from(&m, warm.as_deref()) {
                    Ok(sol) => {
                        warm = Some(sol.bias);
                        sol.j_star
                    }
                    Err(_) => optimal_gain(&m).map_err(tag(t))?,
                };
                out.push(j);
            }
            Ok(out)
        })
        .collect();
    Ok(solved?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regret {
    pub total: f64,
    /// `J*_t − r_t`.
    pub step: Vec<f64>,
    /// Running sum of `step`.
    pub cumulative: Vec<f64>,
}

/// Dynamic regret of one trajectory against the per-step optimal gains.
pub fn dynamic_regret(trace: &RunTrace, benchmark: &[f64]) -> Result<Regret> {
    regret_from_rewards(trace.rewards(), trace.len(), benchmark)
}

pub fn regret_from_rewards(rewards: impl Iterator<Item = f64>, len: usize, benchmark: &[f64]) -> Result<Regret> {
    if len != benchmark.len() {
        return Err(Error::LengthMismatch {
            trace: len,
            benchmark: benchmark.len(),
        });
    }
    let step: Vec<f64> = benchmark.iter().zip(rewards).map(|(j, r)| j - r).collect();
    let cumulative: Vec<f64> = step
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    Ok(Regret {
        total: cumulative.last().copied().unwrap_or(0.0),
        step,
        cumulative,
    })
}
