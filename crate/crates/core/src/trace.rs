//! Per-step run logs.

use serde::{Deserialize, Serialize};

/// One environment interaction. `eta` is the average-reward estimate held
/// by the learner when the step was taken (before its update).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub eta: f64,
    pub segment: usize,
    pub arm: Option<usize>,
}

/// Bandit bookkeeping for one BORL epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub arm: usize,
    pub hypothesized_delta: f64,
    pub epoch_reward: f64,
    pub steps: usize,
    /// Sampling distribution the arm was drawn from.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    /// Empty unless the run was driven by the bandit master.
    pub epochs: Vec<EpochSummary>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.reward)
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards().sum()
    }
}
