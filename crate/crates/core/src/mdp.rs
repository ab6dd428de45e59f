//! Stationary MDP snapshots, tabular policies, and exact policy evaluation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for stochastic matrices and policies.
pub const STOCHASTIC_TOL: f64 = 1e-12;

const POWER_ITER_MAX: usize = 1_000_000;
const POWER_ITER_TOL: f64 = 1e-13;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;
const LOG_FLOOR: f64 = 1e-300;

/// A single stationary environment `(P, r)` over finite states and actions.
///
/// Transitions are stored flat, indexed `(s * n_actions + a) * n_states + s'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSnapshot {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    reward_bound: f64,
}

impl MdpSnapshot {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        reward_bound: f64,
    ) -> Result<Self> {
        let snapshot = Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            reward_bound,
        };
        snapshot.validate()?;
        Ok(snapshot)
    }

    /// Builds a snapshot without checking invariants. Callers must only use
    /// this for values derived from already validated snapshots (e.g. convex
    /// combinations).
    pub(crate) fn from_parts_unchecked(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        reward_bound: f64,
    ) -> Self {
        Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            reward_bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::InvalidSnapshot("empty state or action space".into()));
        }
        let expected = ns
            .checked_mul(na)
            .and_then(|x| x.checked_mul(ns))
            .ok_or_else(|| Error::InvalidSnapshot("dimensions overflow".into()))?;
        if self.transitions.len() != expected {
            return Err(Error::InvalidSnapshot(format!(
                "transition table has {} entries, expected {expected}",
                self.transitions.len()
            )));
        }
        if self.rewards.len() != ns * na {
            return Err(Error::InvalidSnapshot(format!(
                "reward table has {} entries, expected {}",
                self.rewards.len(),
                ns * na
            )));
        }
        if !(self.reward_bound.is_finite() && self.reward_bound > 0.0) {
            return Err(Error::InvalidSnapshot("reward bound must be positive".into()));
        }
        for (i, row) in self.transitions.chunks_exact(ns).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidSnapshot(format!(
                    "negative or non-finite probability in row (s={}, a={})",
                    i / na,
                    i % na
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidSnapshot(format!(
                    "row (s={}, a={}) sums to {sum}",
                    i / na,
                    i % na
                )));
            }
        }
        if let Some(i) = self
            .rewards
            .iter()
            .position(|r| !(r.is_finite() && r.abs() <= self.reward_bound))
        {
            return Err(Error::InvalidSnapshot(format!(
                "reward at (s={}, a={}) exceeds bound {}",
                i / na,
                i % na,
                self.reward_bound
            )));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn same_shape(&self, other: &MdpSnapshot) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    /// `max_{s,a} Σ_{s'} |P(s'|s,a) − P'(s'|s,a)|`.
    pub fn transition_distance(&self, other: &MdpSnapshot) -> f64 {
        self.transitions
            .chunks_exact(self.n_states)
            .zip(other.transitions.chunks_exact(other.n_states))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max_{s,a,s'} |P(s'|s,a) − P'(s'|s,a)|`.
    pub fn transition_distance_elementwise(&self, other: &MdpSnapshot) -> f64 {
        max_abs_diff(&self.transitions, &other.transitions)
    }

    /// `max_{s,a} |r(s,a) − r'(s,a)|`.
    pub fn reward_distance(&self, other: &MdpSnapshot) -> f64 {
        max_abs_diff(&self.rewards, &other.rewards)
    }

    /// Transition matrix of the chain induced by `policy`, row-major `|S|×|S|`.
    pub fn induced_chain(&self, policy: &TabularPolicy) -> Vec<f64> {
        let ns = self.n_states;
        let mut chain = vec![0.0; ns * ns];
        for s in 0..ns {
            let out = &mut chain[s * ns..(s + 1) * ns];
            for a in 0..self.n_actions {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                for (o, p) in out.iter_mut().zip(self.transition_row(s, a)) {
                    *o += w * p;
                }
            }
        }
        chain
    }

    fn policy_reward(&self, policy: &TabularPolicy) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| policy.prob(s, a) * self.reward(s, a)).sum())
            .collect()
    }
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Per-state action distribution, stored row-major `|S|×|A|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Any row-stochastic table; zeros are allowed (deterministic policies).
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::InvalidProbability(format!(
                "policy table of length {} does not match {n_states}x{n_actions}",
                probs.len()
            )));
        }
        for (s, row) in probs.chunks_exact(n_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidProbability(format!(
                    "policy row {s} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self {
            n_states: actions.len(),
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest deviation from the uniform policy.
    pub fn distance_from_uniform(&self) -> f64 {
        let u = 1.0 / self.n_actions as f64;
        self.probs.iter().map(|p| (p - u).abs()).fold(0.0, f64::max)
    }
}

/// Exact average reward and differential values of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub avg_reward: f64,
    /// Differential action values, shifted to sum to zero.
    pub q_values: Vec<f64>,
    /// `v(s) = Σ_a π(a|s) q(s,a)`.
    pub state_values: Vec<f64>,
}

/// Stationary distribution of the chain induced by `policy` on `snapshot`.
///
/// Solves `(I − P_πᵀ) d = 0` with one equation replaced by `Σ d = 1`; falls
/// back to power iteration when the dense solve is singular or inaccurate.
pub fn stationary_distribution(snapshot: &MdpSnapshot, policy: &TabularPolicy) -> Result<Vec<f64>> {
    let ns = snapshot.n_states();
    let chain = snapshot.induced_chain(policy);
    if ns == 1 {
        return Ok(vec![1.0]);
    }

    let mut system = DMatrix::<f64>::zeros(ns, ns);
    for i in 0..ns {
        for j in 0..ns {
            // row i: d_i − Σ_j P(j, i) d_j
            let identity = if i == j { 1.0 } else { 0.0 };
            system[(i, j)] = identity - chain[j * ns + i];
        }
    }
    for j in 0..ns {
        system[(ns - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(ns);
    rhs[ns - 1] = 1.0;

    if let Some(sol) = system.lu().solve(&rhs) {
        let mut d: Vec<f64> = sol.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = d.iter().sum();
        if total.is_finite() && total > 0.0 {
            d.iter_mut().for_each(|x| *x /= total);
            if stationary_residual(&chain, &d) <= STATIONARY_RESIDUAL_TOL {
                return Ok(d);
            }
        }
    }
    power_iteration(&chain, ns)
}

fn stationary_residual(chain: &[f64], d: &[f64]) -> f64 {
    let ns = d.len();
    (0..ns)
        .map(|j| {
            let dp: f64 = (0..ns).map(|i| d[i] * chain[i * ns + j]).sum();
            (d[j] - dp).abs()
        })
        .sum()
}

fn power_iteration(chain: &[f64], ns: usize) -> Result<Vec<f64>> {
    let mut d = vec![0.0; ns];
    d[0] = 1.0;
    let mut next = vec![0.0; ns];
    for _ in 0..POWER_ITER_MAX {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..ns {
            let di = d[i];
            for (n, p) in next.iter_mut().zip(&chain[i * ns..(i + 1) * ns]) {
                *n += di * p;
            }
        }
        let delta: f64 = d.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut d, &mut next);
        if delta <= POWER_ITER_TOL {
            let total: f64 = d.iter().sum();
            d.iter_mut().for_each(|x| *x /= total);
            return Ok(d);
        }
    }
    Err(Error::NonErgodic)
}

/// Average reward `J^π` and the zero-sum differential action values `q^π`.
///
/// The Bellman system `q = r − J + P v`, `v = Σ_a π q` has a one-dimensional
/// null space; `v(0)` is pinned to zero and the solution is then shifted so
/// that `Σ q = 0`.
pub fn evaluate_policy(snapshot: &MdpSnapshot, policy: &TabularPolicy) -> Result<ValueSolution> {
    let (ns, na) = (snapshot.n_states(), snapshot.n_actions());
    let d = stationary_distribution(snapshot, policy)?;
    let r_pi = snapshot.policy_reward(policy);
    let avg_reward: f64 = d.iter().zip(&r_pi).map(|(x, r)| x * r).sum();

    let chain = snapshot.induced_chain(policy);
    let mut system = DMatrix::<f64>::zeros(ns, ns);
    let mut rhs = DVector::<f64>::zeros(ns);
    for s in 0..ns {
        for s2 in 0..ns {
            let identity = if s == s2 { 1.0 } else { 0.0 };
            system[(s, s2)] = identity - chain[s * ns + s2];
        }
        rhs[s] = r_pi[s] - avg_reward;
    }
    for s2 in 0..ns {
        system[(0, s2)] = if s2 == 0 { 1.0 } else { 0.0 };
    }
    rhs[0] = 0.0;
    let v = system.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem);
    }

    let mut q = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let next: f64 = snapshot
                .transition_row(s, a)
                .iter()
                .zip(v.iter())
                .map(|(p, x)| p * x)
                .sum();
            q.push(snapshot.reward(s, a) - avg_reward + next);
        }
    }
    let q_values = project_e(&q);
    let state_values = (0..ns)
        .map(|s| {
            policy
                .row(s)
                .iter()
                .zip(&q_values[s * na..(s + 1) * na])
                .map(|(p, x)| p * x)
                .sum()
        })
        .collect();
    Ok(ValueSolution {
        avg_reward,
        q_values,
        state_values,
    })
}

/// Natural policy gradient step for the tabular softmax parameterization:
/// `π'(a|s) ∝ π(a|s) exp(α q(s,a))`, evaluated in log-space.
pub fn softmax_npg_update(policy: &TabularPolicy, q_table: &[f64], alpha: f64) -> TabularPolicy {
    let mut out = policy.clone();
    softmax_npg_update_in_place(&mut out, q_table, alpha);
    out
}

pub(crate) fn softmax_npg_update_in_place(policy: &mut TabularPolicy, q_table: &[f64], alpha: f64) {
    let na = policy.n_actions;
    debug_assert_eq!(q_table.len(), policy.probs.len());
    if alpha == 0.0 {
        return;
    }
    let mut logits = vec![0.0; na];
    for (row, q_row) in policy.probs.chunks_exact_mut(na).zip(q_table.chunks_exact(na)) {
        // Shift invariance: a constant row leaves π(·|s) unchanged; skip it
        // so the identity holds bit-for-bit.
        if q_row.iter().all(|&q| q == q_row[0]) {
            continue;
        }
        let mut max = f64::NEG_INFINITY;
        for ((l, p), q) in logits.iter_mut().zip(row.iter()).zip(q_row) {
            *l = p.max(LOG_FLOOR).ln() + alpha * q;
            max = max.max(*l);
        }
        let mut total = 0.0;
        for (l, p) in logits.iter().zip(row.iter_mut()) {
            *p = (l - max).exp();
            total += *p;
        }
        row.iter_mut().for_each(|p| *p /= total);
    }
}

/// Euclidean projection onto the ball of radius `radius`.
pub fn project_ball(q_table: &[f64], radius: f64) -> Vec<f64> {
    let mut out = q_table.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

pub(crate) fn project_ball_in_place(q_table: &mut [f64], radius: f64) {
    let norm = l2_norm(q_table);
    if norm > radius {
        let scale = radius / norm;
        q_table.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Orthogonal projection onto the zero-sum subspace.
pub fn project_e(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
