//! Non-stationary natural actor-critic with periodic restarts.
//!
//! The horizon is split into `N` segments of `H = ⌊T/N⌋` steps (plus one
//! shorter trailing segment when `N` does not divide `T`). Each segment starts
//! from a uniform policy, a zero critic and a zero average-reward estimate.
//! Inside a segment every step runs, with all right-hand sides read at `t`:
//!
//! ```text
//! η_{t+1}      = η_t + γ (r_t − η_t)
//! q_{t+1}      = Π_R[ q_t + β (r_t − η_t + q_t(s', a') − q_t(s, a)) e_{(s,a)} ]
//! π_{t+1}(·|s) ∝ π_t(·|s) exp(α q_t(s, ·))   for every s
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSchedule;
use crate::error::{Error, Result};
use crate::mdp::{project_ball_in_place, softmax_npg_update_in_place, TabularPolicy};
use crate::rng::{agent_stream, Stream};
use crate::trace::{RunTrace, StepRecord};

/// Lower clamp for budget-derived step sizes.
pub const STEP_FLOOR: f64 = 1e-4;
/// Upper clamp keeping step sizes strictly below 1/2.
pub const STEP_CEIL: f64 = 0.499;
/// Default critic radius as a multiple of the reward bound.
pub const DEFAULT_RADIUS_SCALE: f64 = 100.0;

/// Where the ball projection of the critic update applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionScope {
    /// Project the whole table onto `‖q‖₂ ≤ R`.
    #[default]
    FullVector,
    /// Clip only the updated entry to `[−R, R]`.
    Entry,
}

/// Initial state of each segment after a restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartState {
    /// Draw the state uniformly at random.
    #[default]
    Teleport,
    /// Keep the state the previous segment ended in.
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsNacParams {
    pub actor_step: f64,
    pub critic_step: f64,
    pub reward_step: f64,
    pub n_restarts: usize,
    pub radius: f64,
    pub horizon: usize,
    #[serde(default)]
    pub projection: ProjectionScope,
    #[serde(default)]
    pub restart_state: RestartState,
}

impl NsNacParams {
    /// Checks `0 < α, β, γ < 1/2`, `1 ≤ N ≤ T` and `R > 0`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("actor_step", self.actor_step),
            ("critic_step", self.critic_step),
            ("reward_step", self.reward_step),
        ] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must lie in the open interval (0, 1/2)"
                )));
            }
        }
        self.validate_structure()
    }

    fn validate_structure(&self) -> Result<()> {
        if self.horizon > 0 && !(1..=self.horizon).contains(&self.n_restarts) {
            return Err(Error::InvalidParams(format!(
                "n_restarts = {} must lie in [1, {}]",
                self.n_restarts, self.horizon
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "radius = {} must be positive",
                self.radius
            )));
        }
        Ok(())
    }

    /// Relaxed check used by [`run`]: zero step sizes are allowed so that
    /// individual timescales can be frozen.
    fn validate_runnable(&self) -> Result<()> {
        for (name, v) in [
            ("actor_step", self.actor_step),
            ("critic_step", self.critic_step),
            ("reward_step", self.reward_step),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        self.validate_structure()
    }

    pub fn segment_len(&self) -> usize {
        self.horizon.checked_div(self.n_restarts).unwrap_or(self.horizon)
    }
}

fn clamp_step(x: f64) -> f64 {
    if x.is_nan() {
        STEP_FLOOR
    } else {
        x.clamp(STEP_FLOOR, STEP_CEIL)
    }
}

/// Budget-optimal settings: `β = γ = (Δ/T)^{1/3}`, `α = (Δ/T)^{1/2}`,
/// `N = Δ^{5/6} T^{1/6}`, clamped to valid ranges, and `R = 100·U_R`.
pub fn default_hyperparameters(horizon: usize, delta_total: f64, reward_bound: f64) -> Result<NsNacParams> {
    if horizon < 1 {
        return Err(Error::InvalidHorizon(horizon));
    }
    if delta_total.is_nan() || delta_total < 0.0 {
        return Err(Error::InvalidParams(format!(
            "variation budget {delta_total} must be non-negative"
        )));
    }
    let t = horizon as f64;
    let ratio = delta_total / t;
    let n = (delta_total.powf(5.0 / 6.0) * t.powf(1.0 / 6.0)).round();
    let n_restarts = if n.is_finite() {
        (n as usize).clamp(1, horizon)
    } else {
        horizon
    };
    Ok(NsNacParams {
        actor_step: clamp_step(ratio.sqrt()),
        critic_step: clamp_step(ratio.cbrt()),
        reward_step: clamp_step(ratio.cbrt()),
        n_restarts,
        radius: DEFAULT_RADIUS_SCALE * reward_bound,
        horizon,
        projection: ProjectionScope::default(),
        restart_state: RestartState::default(),
    })
}

/// `η + γ (r − η)`.
#[inline]
pub fn update_eta(eta: f64, reward: f64, gamma: f64) -> f64 {
    eta + gamma * (reward - eta)
}

/// Learner state inside one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub policy: TabularPolicy,
    pub q_table: Vec<f64>,
    pub eta: f64,
    pub state: usize,
    pub action: usize,
    pub segment: usize,
    pub step_in_segment: usize,
}

impl LearnerState {
    /// Fresh learner at `(state, action)`: uniform policy, zero critic, zero η.
    pub fn reset(n_states: usize, n_actions: usize, state: usize, action: usize, segment: usize) -> Self {
        Self {
            policy: TabularPolicy::uniform(n_states, n_actions),
            q_table: vec![0.0; n_states * n_actions],
            eta: 0.0,
            state,
            action,
            segment,
            step_in_segment: 0,
        }
    }

    fn index(&self, s: usize, a: usize) -> usize {
        s * self.policy.n_actions() + a
    }
}

/// Projected TD(0) step on the entry `(state.state, state.action)`, using
/// the full-vector projection.
pub fn update_critic(state: &LearnerState, reward: f64, next_sa: (usize, usize), beta: f64, radius: f64) -> Vec<f64> {
    update_critic_scoped(state, reward, next_sa, beta, radius, ProjectionScope::FullVector)
}

pub fn update_critic_scoped(
    state: &LearnerState,
    reward: f64,
    next_sa: (usize, usize),
    beta: f64,
    radius: f64,
    scope: ProjectionScope,
) -> Vec<f64> {
    let mut q = state.q_table.clone();
    let cur = state.index(state.state, state.action);
    let next = state.index(next_sa.0, next_sa.1);
    critic_step_in_place(&mut q, cur, next, reward, state.eta, beta, radius, scope);
    q
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn critic_step_in_place(
    q: &mut [f64],
    cur: usize,
    next: usize,
    reward: f64,
    eta: f64,
    beta: f64,
    radius: f64,
    scope: ProjectionScope,
) {
    let td = reward - eta + q[next] - q[cur];
    q[cur] += beta * td;
    match scope {
        ProjectionScope::FullVector => project_ball_in_place(q, radius),
        ProjectionScope::Entry => q[cur] = q[cur].clamp(-radius, radius),
    }
}

fn sample_action(policy: &TabularPolicy, s: usize, rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let row = policy.row(s);
    let mut cum = 0.0;
    for (a, p) in row.iter().enumerate() {
        cum += p;
        if u < cum {
            return a;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Read-only view of the learner handed to observers before each step.
#[derive(Debug, Clone, Copy)]
pub struct LearnerView<'a> {
    pub t: usize,
    pub state: &'a LearnerState,
}

/// Observer hook called before every step; used for snapshots and invariant checks.
pub trait Observer {
    fn before_step(&mut self, view: LearnerView<'_>);
}

impl<F: FnMut(LearnerView<'_>)> Observer for F {
    fn before_step(&mut self, view: LearnerView<'_>) {
        self(view)
    }
}

struct NoObserver;

impl Observer for NoObserver {
    fn before_step(&mut self, _: LearnerView<'_>) {}
}

/// Runs NS-NAC over `[0, params.horizon)` of `schedule` with the learner
/// stream derived from `seed`.
pub fn run(params: &NsNacParams, schedule: &EnvironmentSchedule, seed: u64) -> Result<RunTrace> {
    let mut rng = agent_stream(seed);
    let records = run_window(params, schedule, 0, &mut rng, &mut NoObserver)?;
    Ok(RunTrace {
        records,
        epochs: Vec::new(),
    })
}

pub fn run_observed(
    params: &NsNacParams,
    schedule: &EnvironmentSchedule,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<RunTrace> {
    let mut rng = agent_stream(seed);
    let records = run_window(params, schedule, 0, &mut rng, observer)?;
    Ok(RunTrace {
        records,
        epochs: Vec::new(),
    })
}

/// Runs NS-NAC for `params.horizon` steps on the global time window starting
/// at `start`, drawing from `rng`.
pub fn run_window(
    params: &NsNacParams,
    schedule: &EnvironmentSchedule,
    start: usize,
    rng: &mut Stream,
    observer: &mut dyn Observer,
) -> Result<Vec<StepRecord>> {
    params.validate_runnable()?;
    let steps = params.horizon;
    if start + steps > schedule.horizon() {
        return Err(Error::IndexOutOfHorizon {
            t: start + steps.saturating_sub(1),
            horizon: schedule.horizon(),
        });
    }
    let (ns, na) = (schedule.n_states(), schedule.n_actions());
    let mut records = Vec::with_capacity(steps);
    if steps == 0 {
        return Ok(records);
    }

    let seg_len = params.segment_len();
    let full = params.n_restarts;
    let remainder = steps - full * seg_len;
    let segments = (0..full).map(|_| seg_len).chain((remainder > 0).then_some(remainder));

    let mut t = start;
    let mut last_state: Option<usize> = None;
    for (segment, len) in segments.enumerate() {
        let s0 = match (params.restart_state, last_state) {
            (RestartState::Continue, Some(s)) => s,
            _ => rng.random_range(0..ns),
        };
        let policy = TabularPolicy::uniform(ns, na);
        let a0 = sample_action(&policy, s0, rng);
        let mut learner = LearnerState::reset(ns, na, s0, a0, segment);

        for h in 0..len {
            learner.step_in_segment = h;
            observer.before_step(LearnerView { t, state: &learner });

            let (s, a) = (learner.state, learner.action);
            let (reward, s_next) = schedule.step(t, s, a, rng)?;
            let a_next = sample_action(&learner.policy, s_next, rng);
            records.push(StepRecord {
                t,
                state: s,
                action: a,
                reward,
                eta: learner.eta,
                segment,
                arm: None,
            });

            // The actor reads q_t, so it runs before the critic overwrites it.
            softmax_npg_update_in_place(&mut learner.policy, &learner.q_table, params.actor_step);
            let eta_t = learner.eta;
            learner.eta = update_eta(eta_t, reward, params.reward_step);
            critic_step_in_place(
                &mut learner.q_table,
                s * na + a,
                s_next * na + a_next,
                reward,
                eta_t,
                params.critic_step,
                params.radius,
                params.projection,
            );

            learner.state = s_next;
            learner.action = a_next;
            t += 1;
        }
        last_state = Some(learner.state);
    }
    Ok(records)
}
