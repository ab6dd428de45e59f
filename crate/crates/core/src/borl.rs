//! Bandit-over-RL tuning of NS-NAC with an EXP3.P master.
//!
//! The horizon is cut into epochs of `W` steps. Each epoch the master picks
//! a hypothesized variation budget from a geometric grid, NS-NAC runs from a
//! fresh state with the matching budget-optimal parameters, and the epoch's
//! mean reward is fed back as the bandit reward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSchedule;
use crate::error::{Error, Result};
use crate::nac::{self, default_hyperparameters, NsNacParams, Observer, ProjectionScope, RestartState};
use crate::rng::{agent_stream, Stream};
use crate::trace::{EpochSummary, RunTrace};

/// Upper limit applied to the default exploration rate.
pub const ZETA_CAP: f64 = 0.5;

fn grid_exponent_base(horizon: usize) -> usize {
    ((horizon as f64).ln().floor() as usize).max(1)
}

/// Hypothesized budgets `{T^{j/L} : j = 0..=L}` with `L = max(⌊ln T⌋, 1)`.
pub fn arm_grid(horizon: usize) -> Result<Vec<f64>> {
    if horizon < 2 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let t = horizon as f64;
    let l = grid_exponent_base(horizon);
    Ok((0..=l)
        .map(|j| match j {
            0 => 1.0,
            j if j == l => t,
            j => t.powf(j as f64 / l as f64),
        })
        .collect())
}

/// EXP3.P sampling distribution `(1 − ζ) softmax(ξ u) + ζ / K`.
pub fn exp3p_probs(weights: &[f64], xi: f64, zeta: f64) -> Vec<f64> {
    let k = weights.len() as f64;
    let max = weights.iter().map(|u| xi * u).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|u| (xi * u - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| (1.0 - zeta) * e / total + zeta / k).collect()
}

/// Epoch reward rescaled from `[−W·U_R, W·U_R]` into `[0, 1]`.
pub fn rescaled_reward(epoch_reward: f64, epoch_len: usize, reward_bound: f64) -> f64 {
    (epoch_reward / epoch_len as f64 + reward_bound) / (2.0 * reward_bound)
}

/// `u_j + (σ + 𝟙{j = pulled}·R̃) / p_j` for every arm.
pub fn posterior_update(
    weights: &[f64],
    probs: &[f64],
    pulled: usize,
    epoch_reward: f64,
    epoch_len: usize,
    sigma: f64,
    reward_bound: f64,
) -> Result<Vec<f64>> {
    if weights.len() != probs.len() || pulled >= probs.len() {
        return Err(Error::InvalidProbability("arm index or vector length mismatch".into()));
    }
    if let Some(j) = probs.iter().position(|p| p.is_nan() || *p <= 0.0) {
        return Err(Error::InvalidProbability(format!(
            "p[{j}] = {} is not positive",
            probs[j]
        )));
    }
    let gain = rescaled_reward(epoch_reward, epoch_len, reward_bound);
    Ok(weights
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(j, (u, p))| {
            let bonus = if j == pulled { gain } else { 0.0 };
            u + (sigma + bonus) / p
        })
        .collect())
}

/// EXP3.P master state.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3P {
    weights: Vec<f64>,
    xi: f64,
    sigma: f64,
    zeta: f64,
    reward_bound: f64,
}

impl Exp3P {
    pub fn new(n_arms: usize, xi: f64, sigma: f64, zeta: f64, reward_bound: f64) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::InvalidParams("bandit needs at least one arm".into()));
        }
        if !(xi > 0.0 && sigma > 0.0 && zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "need xi > 0, sigma > 0 and 0 < zeta <= 1 (got {xi}, {sigma}, {zeta})"
            )));
        }
        Ok(Self {
            weights: vec![0.0; n_arms],
            xi,
            sigma,
            zeta,
            reward_bound,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn probs(&self) -> Vec<f64> {
        exp3p_probs(&self.weights, self.xi, self.zeta)
    }

    /// Draws an arm from `probs` with one uniform.
    pub fn sample(probs: &[f64], rng: &mut Stream) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (j, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return j;
            }
        }
        probs.len() - 1
    }

    /// Feeds back the cumulative reward of an epoch of `epoch_len` steps
    /// collected by `pulled`, which was drawn from `probs`.
    pub fn update(&mut self, probs: &[f64], pulled: usize, epoch_reward: f64, epoch_len: usize) -> Result<()> {
        self.weights = posterior_update(
            &self.weights,
            probs,
            pulled,
            epoch_reward,
            epoch_len,
            self.sigma,
            self.reward_bound,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorlParams {
    pub horizon: usize,
    pub epoch_len: usize,
    pub xi: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub radius: f64,
    pub reward_bound: f64,
    #[serde(default)]
    pub projection: ProjectionScope,
    #[serde(default)]
    pub restart_state: RestartState,
}

/// `⌊T^{2/3}⌋`, at least 1.
pub fn default_epoch_len(horizon: usize) -> usize {
    ((horizon as f64).powf(2.0 / 3.0).floor() as usize).max(1)
}

impl BorlParams {
    /// Epoch length `⌊T^{2/3}⌋` unless given, and
    /// `ξ = 0.95/√E`, `σ = 1/√E`, `ζ = min(1.05·⌈ln T⌉/√E, ZETA_CAP)` with
    /// `E = ⌈T/W⌉` epochs.
    pub fn defaults(horizon: usize, epoch_len: Option<usize>, reward_bound: f64) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::InvalidHorizon(horizon));
        }
        let w = epoch_len.unwrap_or_else(|| default_epoch_len(horizon));
        if !(1..=horizon).contains(&w) {
            return Err(Error::InvalidParams(format!(
                "epoch length {w} must lie in [1, {horizon}]"
            )));
        }
        let epochs = horizon.div_ceil(w) as f64;
        let ln_ceil = (horizon as f64).ln().ceil();
        Ok(Self {
            horizon,
            epoch_len: w,
            xi: 0.95 * (ln_ceil / (ln_ceil * epochs)).sqrt(),
            sigma: (ln_ceil / (ln_ceil * epochs)).sqrt(),
            zeta: (1.05 * (ln_ceil * ln_ceil / epochs).sqrt()).min(ZETA_CAP),
            radius: nac::DEFAULT_RADIUS_SCALE * reward_bound,
            reward_bound,
            projection: ProjectionScope::default(),
            restart_state: RestartState::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidHorizon(self.horizon));
        }
        if !(1..=self.horizon).contains(&self.epoch_len) {
            return Err(Error::InvalidParams(format!(
                "epoch length {} must lie in [1, {}]",
                self.epoch_len, self.horizon
            )));
        }
        if !(self.xi > 0.0 && self.sigma > 0.0) {
            return Err(Error::InvalidParams("xi and sigma must be positive".into()));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::InvalidParams(format!("zeta = {} must lie in (0, 1)", self.zeta)));
        }
        if !(self.radius > 0.0 && self.reward_bound > 0.0) {
            return Err(Error::InvalidParams("radius and reward bound must be positive".into()));
        }
        Ok(())
    }
}

/// NS-NAC parameters for one epoch given the arm's hypothesized budget. The
/// restart count is rescaled from the full horizon to the epoch.
pub fn epoch_params(params: &BorlParams, budget: f64, epoch_len: usize) -> Result<NsNacParams> {
    let mut p = default_hyperparameters(params.horizon, budget, params.reward_bound)?;
    let scaled = (p.n_restarts as f64 * epoch_len as f64 / params.horizon as f64).round() as usize;
    p.n_restarts = scaled.clamp(1, epoch_len.max(1));
    p.horizon = epoch_len;
    p.radius = params.radius;
    p.projection = params.projection;
    p.restart_state = params.restart_state;
    Ok(p)
}

pub fn run_borl(params: &BorlParams, schedule: &EnvironmentSchedule, seed: u64) -> Result<RunTrace> {
    run_borl_observed(params, schedule, seed, &mut |_: nac::LearnerView<'_>| {})
}

pub fn run_borl_observed(
    params: &BorlParams,
    schedule: &EnvironmentSchedule,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<RunTrace> {
    params.validate()?;
    if params.horizon > schedule.horizon() {
        return Err(Error::IndexOutOfHorizon {
            t: params.horizon - 1,
            horizon: schedule.horizon(),
        });
    }
    let grid = arm_grid(params.horizon)?;
    let mut master = Exp3P::new(grid.len(), params.xi, params.sigma, params.zeta, params.reward_bound)?;
    let mut rng = agent_stream(seed);
    let mut trace = RunTrace::default();

    let w = params.epoch_len;
    for epoch in 0..=params.horizon / w {
        let start = epoch * w;
        let len = w.min(params.horizon - start);
        if len == 0 {
            break;
        }
        let probs = master.probs();
        let arm = Exp3P::sample(&probs, &mut rng);
        let nac_params = epoch_params(params, grid[arm], len)?;
        let mut records = nac::run_window(&nac_params, schedule, start, &mut rng, observer)?;
        let epoch_reward: f64 = records.iter().map(|r| r.reward).sum();
        master.update(&probs, arm, epoch_reward, len)?;

        records.iter_mut().for_each(|r| r.arm = Some(arm));
        trace.records.append(&mut records);
        trace.epochs.push(EpochSummary {
            epoch,
            arm,
            hypothesized_delta: grid[arm],
            epoch_reward,
            steps: len,
            probs,
        });
    }
    Ok(trace)
}
