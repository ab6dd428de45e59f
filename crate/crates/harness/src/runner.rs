//! One seed of one configuration: build the schedule, solve the benchmark,
//! run the learner, score it.

use std::time::Instant;

use serde::Serialize;

use nsrl_core::borl::{run_borl_observed, BorlParams};
use nsrl_core::env::{generate_phase_pair, EnvironmentSchedule, VariationBudget};
use nsrl_core::nac::{default_hyperparameters, run_observed, LearnerView, NsNacParams};
use nsrl_core::oracle::{benchmark_series, dynamic_regret, Regret};
use nsrl_core::rng::env_stream;
use nsrl_core::trace::RunTrace;

use crate::config::{Algorithm, EnvConfig, ExperimentConfig, HyperOverrides, ModeKind};
use crate::error::HarnessError;

/// Learner state captured every `snapshot_every` steps.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: usize,
    pub segment: usize,
    pub eta: f64,
    pub policy: Vec<Vec<f64>>,
    pub q_table: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub schedule: EnvironmentSchedule,
    pub budget: VariationBudget,
    pub benchmark: Vec<f64>,
    pub trace: RunTrace,
    pub regret: Regret,
    pub wall_ms: f64,
    pub snapshots: Vec<Snapshot>,
}

/// Phases come from the environment stream of `seed`; random switch times
/// are drawn from the same stream right after.
pub fn build_schedule(env: &EnvConfig, seed: u64) -> Result<EnvironmentSchedule, HarnessError> {
    let mut rng = env_stream(seed);
    let phases = generate_phase_pair(env.n_states, env.n_actions, &mut rng)?;
    let schedule = match env.mode {
        ModeKind::PeriodicAbrupt => {
            EnvironmentSchedule::periodic(phases, env.horizon, env.n_switches, env.vary_rewards)?
        }
        ModeKind::RandomAbrupt => {
            EnvironmentSchedule::random(phases, env.horizon, env.n_switches, env.vary_rewards, &mut rng)?
        }
        ModeKind::Gradual => EnvironmentSchedule::gradual(phases, env.horizon, env.vary_rewards)?,
    };
    Ok(schedule)
}

fn reward_bound(schedule: &EnvironmentSchedule) -> f64 {
    schedule.phases().phase_a().reward_bound()
}

pub fn nac_params(
    algorithm: Algorithm,
    hyper: &HyperOverrides,
    schedule: &EnvironmentSchedule,
    budget: &VariationBudget,
) -> Result<NsNacParams, HarnessError> {
    let mut p = default_hyperparameters(schedule.horizon(), budget.delta_total, reward_bound(schedule))?;
    if let Some(a) = hyper.alpha {
        p.actor_step = a;
    }
    if let Some(b) = hyper.beta {
        p.critic_step = b;
    }
    if let Some(g) = hyper.gamma {
        p.reward_step = g;
    }
    if let Some(n) = hyper.n_restarts {
        p.n_restarts = n;
    }
    if let Some(r) = hyper.radius {
        p.radius = r;
    }
    if let Some(s) = hyper.projection {
        p.projection = s;
    }
    if let Some(s) = hyper.restart_state {
        p.restart_state = s;
    }
    if algorithm == Algorithm::StationaryNac {
        p.n_restarts = 1;
    }
    p.validate()?;
    Ok(p)
}

pub fn borl_params(hyper: &HyperOverrides, schedule: &EnvironmentSchedule) -> Result<BorlParams, HarnessError> {
    let mut p = BorlParams::defaults(schedule.horizon(), hyper.epoch_len, reward_bound(schedule))?;
    if let Some(x) = hyper.xi {
        p.xi = x;
    }
    if let Some(s) = hyper.sigma {
        p.sigma = s;
    }
    if let Some(z) = hyper.zeta {
        p.zeta = z;
    }
    if let Some(r) = hyper.radius {
        p.radius = r;
    }
    if let Some(s) = hyper.projection {
        p.projection = s;
    }
    if let Some(s) = hyper.restart_state {
        p.restart_state = s;
    }
    p.validate()?;
    Ok(p)
}

fn to_rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

/// Runs `algorithm` on a fixed schedule. Hyperparameters not overridden
/// are derived from the schedule's own variation budget.
pub fn run_on_schedule(
    algorithm: Algorithm,
    hyper: &HyperOverrides,
    schedule: &EnvironmentSchedule,
    seed: u64,
    snapshot_every: Option<usize>,
) -> Result<(RunTrace, Vec<Snapshot>), HarnessError> {
    let budget = schedule.variation_budget();
    let mut snapshots = Vec::new();
    let na = schedule.n_actions();
    let mut observer = |view: LearnerView<'_>| {
        if let Some(k) = snapshot_every {
            if view.t.is_multiple_of(k) {
                snapshots.push(Snapshot {
                    t: view.t,
                    segment: view.state.segment,
                    eta: view.state.eta,
                    policy: to_rows(view.state.policy.probs(), na),
                    q_table: to_rows(&view.state.q_table, na),
                });
            }
        }
    };
    let trace = match algorithm {
        Algorithm::NsNac | Algorithm::StationaryNac => {
            let params = nac_params(algorithm, hyper, schedule, &budget)?;
            run_observed(&params, schedule, seed, &mut observer)?
        }
        Algorithm::BorlNsNac => {
            let params = borl_params(hyper, schedule)?;
            run_borl_observed(&params, schedule, seed, &mut observer)?
        }
    };
    Ok((trace, snapshots))
}

/// Full pipeline for one seed. Wall time covers the benchmark solve and the run.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutcome, HarnessError> {
    let started = Instant::now();
    let schedule = build_schedule(&config.env, seed)?;
    let budget = schedule.variation_budget();
    let benchmark = benchmark_series(&schedule)?;
    let (trace, snapshots) = run_on_schedule(config.algorithm, &config.hyper, &schedule, seed, config.snapshot_every)?;
    let regret = dynamic_regret(&trace, &benchmark)?;
    Ok(SeedOutcome {
        seed,
        schedule,
        budget,
        benchmark,
        trace,
        regret,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        snapshots,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
