//! Non-stationary average-reward reinforcement learning on tabular MDPs.
//!
//! * [`mdp`]: stationary snapshots, exact policy evaluation, the softmax
//!   natural-gradient step and the projections used by the critic.
//! * [`env`]: two-phase environments with abrupt or gradual switching and
//!   their variation budgets.
//! * [`oracle`]: optimal average reward per step and dynamic regret.
//! * [`nac`]: the restarting two-timescale natural actor-critic.
//! * [`borl`]: EXP3.P tuning of the actor-critic without a known budget.

pub mod borl;
pub mod env;
pub mod error;
pub mod mdp;
pub mod nac;
pub mod oracle;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
