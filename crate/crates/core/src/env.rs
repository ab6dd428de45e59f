//! Non-stationary environments built from two phases and a switching rule.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::MdpSnapshot;
use crate::rng::Stream;

const DIRICHLET_CONCENTRATION: f64 = 0.5;
const PHASE_A_REWARD_SHAPE: (f64, f64) = (0.5, 0.5);
const PHASE_B_REWARD_SHAPE: (f64, f64) = (0.2, 0.9);

/// The two environments a schedule moves between.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePair {
    phase_a: MdpSnapshot,
    phase_b: MdpSnapshot,
}

impl PhasePair {
    pub fn new(phase_a: MdpSnapshot, phase_b: MdpSnapshot) -> Result<Self> {
        if !phase_a.same_shape(&phase_b) {
            return Err(Error::InvalidSchedule("phases have different shapes".into()));
        }
        if phase_a.reward_bound() != phase_b.reward_bound() {
            return Err(Error::InvalidSchedule("phases have different reward bounds".into()));
        }
        Ok(Self { phase_a, phase_b })
    }

    /// Both phases equal to `snapshot`.
    pub fn stationary(snapshot: MdpSnapshot) -> Self {
        Self {
            phase_b: snapshot.clone(),
            phase_a: snapshot,
        }
    }

    pub fn phase_a(&self) -> &MdpSnapshot {
        &self.phase_a
    }

    pub fn phase_b(&self) -> &MdpSnapshot {
        &self.phase_b
    }

    pub fn n_states(&self) -> usize {
        self.phase_a.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.phase_a.n_actions()
    }
}

fn gamma_draws(rng: &mut Stream, shape: f64, out: &mut [f64]) {
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    for x in out.iter_mut() {
        *x = gamma.sample(rng);
    }
}

fn dirichlet_row(rng: &mut Stream, out: &mut [f64]) {
    loop {
        gamma_draws(rng, DIRICHLET_CONCENTRATION, out);
        let total: f64 = out.iter().sum();
        if total > 0.0 && total.is_finite() {
            out.iter_mut().for_each(|x| *x /= total);
            return;
        }
    }
}

fn beta_draw(rng: &mut Stream, (a, b): (f64, f64)) -> f64 {
    let ga = Gamma::new(a, 1.0).expect("positive shape");
    let gb = Gamma::new(b, 1.0).expect("positive shape");
    loop {
        let x = ga.sample(rng);
        let y = gb.sample(rng);
        let total = x + y;
        if total > 0.0 && total.is_finite() {
            return x / total;
        }
    }
}

/// Draws a random phase pair: Dirichlet(0.5) transition rows for both
/// phases, Beta(0.5, 0.5) rewards for phase A and Beta(0.2, 0.9) for phase B.
pub fn generate_phase_pair(n_states: usize, n_actions: usize, rng: &mut Stream) -> Result<PhasePair> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidParams("need at least one state and one action".into()));
    }
    let rows = n_states * n_actions;
    let mut transitions = [vec![0.0; rows * n_states], vec![0.0; rows * n_states]];
    for table in transitions.iter_mut() {
        for row in table.chunks_exact_mut(n_states) {
            dirichlet_row(rng, row);
        }
    }
    let rewards_a: Vec<f64> = (0..rows).map(|_| beta_draw(rng, PHASE_A_REWARD_SHAPE)).collect();
    let rewards_b: Vec<f64> = (0..rows).map(|_| beta_draw(rng, PHASE_B_REWARD_SHAPE)).collect();
    let [pa, pb] = transitions;
    PhasePair::new(
        MdpSnapshot::new(n_states, n_actions, pa, rewards_a, 1.0)?,
        MdpSnapshot::new(n_states, n_actions, pb, rewards_b, 1.0)?,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Equal-length segments alternating A, B, A, …; `n_switches` phase flips.
    PeriodicAbrupt { n_switches: usize },
    /// Phase flips at each listed time.
    RandomAbrupt { switch_times: Vec<usize> },
    /// Linear interpolation from A at `t = 0` to B at `t = T − 1`.
    Gradual,
}

/// Identifies which distinct environment is active at a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnapshotKey {
    Phase(u8),
    Step(usize),
}

/// Matrix norm used for the transition part of the variation budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionNorm {
    /// `max_{s,a} Σ_{s'} |ΔP|`, the induced ∞-norm.
    #[default]
    RowL1,
    /// `max_{s,a,s'} |ΔP|`.
    ElementwiseMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationBudget {
    pub delta_r: f64,
    pub delta_p: f64,
    pub delta_total: f64,
}

impl VariationBudget {
    fn new(delta_r: f64, delta_p: f64) -> Self {
        Self {
            delta_r,
            delta_p,
            delta_total: delta_r + delta_p,
        }
    }
}

/// Deterministic description of `(P_t, r_t)` for every `t` in `[0, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSchedule {
    phases: PhasePair,
    horizon: usize,
    mode: ScheduleMode,
    vary_rewards: bool,
    // Phase flip times for both abrupt modes (derived for periodic).
    switch_times: Vec<usize>,
}

impl EnvironmentSchedule {
    pub fn periodic(phases: PhasePair, horizon: usize, n_switches: usize, vary_rewards: bool) -> Result<Self> {
        Self::new(
            phases,
            horizon,
            ScheduleMode::PeriodicAbrupt { n_switches },
            vary_rewards,
        )
    }

    /// Switch times drawn uniformly without replacement from `[1, T − 1]`.
    pub fn random(
        phases: PhasePair,
        horizon: usize,
        n_switches: usize,
        vary_rewards: bool,
        rng: &mut Stream,
    ) -> Result<Self> {
        if n_switches > horizon.saturating_sub(1) {
            return Err(Error::InvalidSchedule(format!(
                "{n_switches} switches do not fit in horizon {horizon}"
            )));
        }
        let mut switch_times: Vec<usize> = rand::seq::index::sample(rng, horizon.saturating_sub(1), n_switches)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        switch_times.sort_unstable();
        Self::new(
            phases,
            horizon,
            ScheduleMode::RandomAbrupt { switch_times },
            vary_rewards,
        )
    }

    pub fn gradual(phases: PhasePair, horizon: usize, vary_rewards: bool) -> Result<Self> {
        Self::new(phases, horizon, ScheduleMode::Gradual, vary_rewards)
    }

    /// A single environment held fixed for the whole horizon. Panics if
    /// `horizon` is zero.
    pub fn stationary(snapshot: MdpSnapshot, horizon: usize) -> Self {
        Self::new(
            PhasePair::stationary(snapshot),
            horizon,
            ScheduleMode::PeriodicAbrupt { n_switches: 0 },
            false,
        )
        .expect("positive horizon with zero switches")
    }

    pub fn new(phases: PhasePair, horizon: usize, mode: ScheduleMode, vary_rewards: bool) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon(0));
        }
        let switch_times = match &mode {
            ScheduleMode::PeriodicAbrupt { n_switches } => {
                let k = *n_switches;
                if k > 0 && k >= horizon {
                    return Err(Error::InvalidSchedule(format!(
                        "{k} switches need a horizon of at least {}",
                        k + 1
                    )));
                }
                let segment = if k == 0 { horizon } else { horizon / (k + 1) };
                (1..=k).map(|j| j * segment).collect()
            }
            ScheduleMode::RandomAbrupt { switch_times } => {
                if switch_times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidSchedule(
                        "switch times must be strictly increasing".into(),
                    ));
                }
                if switch_times.iter().any(|&t| t == 0 || t >= horizon) {
                    return Err(Error::InvalidSchedule(format!(
                        "switch times must lie in [1, {}]",
                        horizon.saturating_sub(1)
                    )));
                }
                switch_times.clone()
            }
            ScheduleMode::Gradual => Vec::new(),
        };
        Ok(Self {
            phases,
            horizon,
            mode,
            vary_rewards,
            switch_times,
        })
    }

    pub fn phases(&self) -> &PhasePair {
        &self.phases
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mode(&self) -> &ScheduleMode {
        &self.mode
    }

    pub fn vary_rewards(&self) -> bool {
        self.vary_rewards
    }

    pub fn n_states(&self) -> usize {
        self.phases.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.phases.n_actions()
    }

    pub fn switch_times(&self) -> &[usize] {
        &self.switch_times
    }

    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self.mode, ScheduleMode::Gradual)
    }

    /// Same environment and switching rule over a different horizon. Random
    /// switch times past the new horizon are dropped.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mode = match &self.mode {
            ScheduleMode::RandomAbrupt { switch_times } => ScheduleMode::RandomAbrupt {
                switch_times: switch_times.iter().copied().filter(|&t| t < horizon).collect(),
            },
            other => other.clone(),
        };
        Self::new(self.phases.clone(), horizon, mode, self.vary_rewards)
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.horizon {
            return Err(Error::IndexOutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    fn phase_index(&self, t: usize) -> u8 {
        (self.switch_times.partition_point(|&s| s <= t) % 2) as u8
    }

    fn gradual_weight(&self, t: usize) -> f64 {
        if self.horizon <= 1 {
            0.0
        } else {
            t as f64 / (self.horizon - 1) as f64
        }
    }

    fn phase(&self, index: u8) -> &MdpSnapshot {
        if index == 0 {
            &self.phases.phase_a
        } else {
            &self.phases.phase_b
        }
    }

    /// Key of the distinct environment active at `t`; equal keys mean equal snapshots.
    pub fn snapshot_key(&self, t: usize) -> Result<SnapshotKey> {
        self.check_t(t)?;
        Ok(match self.mode {
            ScheduleMode::Gradual => SnapshotKey::Step(t),
            _ => SnapshotKey::Phase(self.phase_index(t)),
        })
    }

    /// The environment `M_t`.
    pub fn env_at(&self, t: usize) -> Result<MdpSnapshot> {
        self.check_t(t)?;
        let a = &self.phases.phase_a;
        match self.mode {
            ScheduleMode::Gradual => {
                let b = &self.phases.phase_b;
                let w = self.gradual_weight(t);
                let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> {
                    x.iter().zip(y).map(|(p, q)| (1.0 - w) * p + w * q).collect()
                };
                let rewards = if self.vary_rewards {
                    lerp(a.rewards(), b.rewards())
                } else {
                    a.rewards().to_vec()
                };
                Ok(MdpSnapshot::from_parts_unchecked(
                    a.n_states(),
                    a.n_actions(),
                    lerp(a.transitions(), b.transitions()),
                    rewards,
                    a.reward_bound(),
                ))
            }
            _ => {
                let active = self.phase(self.phase_index(t));
                let rewards = if self.vary_rewards {
                    active.rewards()
                } else {
                    a.rewards()
                };
                Ok(MdpSnapshot::from_parts_unchecked(
                    a.n_states(),
                    a.n_actions(),
                    active.transitions().to_vec(),
                    rewards.to_vec(),
                    a.reward_bound(),
                ))
            }
        }
    }

    /// `r_t(s, a)` without materializing the snapshot.
    pub fn reward(&self, t: usize, s: usize, a: usize) -> Result<f64> {
        self.check_t(t)?;
        let ra = self.phases.phase_a.reward(s, a);
        if !self.vary_rewards {
            return Ok(ra);
        }
        Ok(match self.mode {
            ScheduleMode::Gradual => {
                let w = self.gradual_weight(t);
                (1.0 - w) * ra + w * self.phases.phase_b.reward(s, a)
            }
            _ => self.phase(self.phase_index(t)).reward(s, a),
        })
    }

    /// One environment transition: deterministic reward and a successor
    /// drawn by inverse CDF from a single uniform.
    pub fn step(&self, t: usize, state: usize, action: usize, rng: &mut Stream) -> Result<(f64, usize)> {
        let reward = self.reward(t, state, action)?;
        let u: f64 = rng.random();
        let next = match self.mode {
            ScheduleMode::Gradual => {
                let w = self.gradual_weight(t);
                let ra = self.phases.phase_a.transition_row(state, action);
                let rb = self.phases.phase_b.transition_row(state, action);
                inverse_cdf(ra.iter().zip(rb).map(|(p, q)| (1.0 - w) * p + w * q), u)
            }
            _ => {
                let row = self.phase(self.phase_index(t)).transition_row(state, action);
                inverse_cdf(row.iter().copied(), u)
            }
        };
        Ok((reward, next))
    }

    /// Variation budgets over the full horizon under the row-L1 norm.
    pub fn variation_budget(&self) -> VariationBudget {
        self.variation_budget_with(TransitionNorm::RowL1)
    }

    pub fn variation_budget_with(&self, norm: TransitionNorm) -> VariationBudget {
        self.variation_budget_range(0, self.horizon, norm)
    }

    /// Budget accumulated by the per-step changes strictly inside
    /// `[start, end)`: `Σ_{t=start}^{end−2} ‖M_{t+1} − M_t‖`. The change
    /// after the final step of the horizon counts as zero.
    pub fn variation_budget_range(&self, start: usize, end: usize, norm: TransitionNorm) -> VariationBudget {
        let end = end.min(self.horizon);
        if end <= start + 1 {
            return VariationBudget::new(0.0, 0.0);
        }
        let (pa, pb) = (&self.phases.phase_a, &self.phases.phase_b);
        let dp = match norm {
            TransitionNorm::RowL1 => pa.transition_distance(pb),
            TransitionNorm::ElementwiseMax => pa.transition_distance_elementwise(pb),
        };
        let dr = if self.vary_rewards { pa.reward_distance(pb) } else { 0.0 };
        match self.mode {
            ScheduleMode::Gradual => {
                // Interpolation is linear in the weight, so each step's
                // change is the weight increment times the phase distance,
                // and the increments telescope.
                let moved = self.gradual_weight(end - 1) - self.gradual_weight(start);
                VariationBudget::new(moved * dr, moved * dp)
            }
            _ => {
                let flips = self.switch_times.iter().filter(|&&s| s > start && s < end).count() as f64;
                VariationBudget::new(flips * dr, flips * dp)
            }
        }
    }
}

fn inverse_cdf(probs: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.enumerate() {
        cum += p;
        if p > 0.0 {
            last_positive = i;
        }
        if u < cum {
            return i;
        }
    }
    last_positive
}

/// On-disk form of a schedule: phase matrices as nested arrays plus the
/// switching rule and optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub format: String,
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub reward_bound: f64,
    pub vary_rewards: bool,
    pub mode: ScheduleMode,
    pub phase_a: PhaseTables,
    pub phase_b: PhaseTables,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// `transitions[s][a][s']` and `rewards[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTables {
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

pub const SCHEDULE_FORMAT: &str = "nsrl-schedule/1";

/// Size limits applied when loading a schedule document.
pub const MAX_FILE_HORIZON: usize = 1 << 32;
pub const MAX_FILE_SWITCHES: usize = 1 << 24;

impl PhaseTables {
    fn from_snapshot(m: &MdpSnapshot) -> Self {
        let (ns, na) = (m.n_states(), m.n_actions());
        Self {
            transitions: (0..ns)
                .map(|s| (0..na).map(|a| m.transition_row(s, a).to_vec()).collect())
                .collect(),
            rewards: (0..ns).map(|s| (0..na).map(|a| m.reward(s, a)).collect()).collect(),
        }
    }

    fn to_snapshot(&self, ns: usize, na: usize, reward_bound: f64) -> Result<MdpSnapshot> {
        let shape_err = || Error::InvalidSchedule(format!("phase tables do not match {ns} states x {na} actions"));
        if self.transitions.len() != ns || self.rewards.len() != ns {
            return Err(shape_err());
        }
        let mut transitions = Vec::new();
        for per_state in &self.transitions {
            if per_state.len() != na {
                return Err(shape_err());
            }
            for row in per_state {
                if row.len() != ns {
                    return Err(shape_err());
                }
                transitions.extend_from_slice(row);
            }
        }
        let mut rewards = Vec::with_capacity(ns * na);
        for row in &self.rewards {
            if row.len() != na {
                return Err(shape_err());
            }
            rewards.extend_from_slice(row);
        }
        MdpSnapshot::new(ns, na, transitions, rewards, reward_bound)
    }
}

impl ScheduleFile {
    pub fn from_schedule(schedule: &EnvironmentSchedule, seed: Option<u64>, config_hash: Option<String>) -> Self {
        let a = schedule.phases.phase_a();
        Self {
            format: SCHEDULE_FORMAT.to_string(),
            horizon: schedule.horizon,
            n_states: a.n_states(),
            n_actions: a.n_actions(),
            reward_bound: a.reward_bound(),
            vary_rewards: schedule.vary_rewards,
            mode: schedule.mode.clone(),
            phase_a: PhaseTables::from_snapshot(a),
            phase_b: PhaseTables::from_snapshot(schedule.phases.phase_b()),
            seed,
            config_hash,
        }
    }

    pub fn to_schedule(&self) -> Result<EnvironmentSchedule> {
        if self.format != SCHEDULE_FORMAT {
            return Err(Error::InvalidSchedule(format!("unknown format tag {:?}", self.format)));
        }
        if self.horizon > MAX_FILE_HORIZON {
            return Err(Error::InvalidSchedule(format!(
                "horizon {} exceeds {MAX_FILE_HORIZON}",
                self.horizon
            )));
        }
        if let ScheduleMode::PeriodicAbrupt { n_switches } = self.mode {
            if n_switches > MAX_FILE_SWITCHES {
                return Err(Error::InvalidSchedule(format!(
                    "{n_switches} switches exceed {MAX_FILE_SWITCHES}"
                )));
            }
        }
        let a = self
            .phase_a
            .to_snapshot(self.n_states, self.n_actions, self.reward_bound)?;
        let b = self
            .phase_b
            .to_snapshot(self.n_states, self.n_actions, self.reward_bound)?;
        EnvironmentSchedule::new(
            PhasePair::new(a, b)?,
            self.horizon,
            self.mode.clone(),
            self.vary_rewards,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSchedule(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Parses and validates a schedule document.
pub fn parse_schedule(text: &str) -> Result<EnvironmentSchedule> {
    ScheduleFile::from_json(text)?.to_schedule()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn small_pair(seed: u64) -> PhasePair {
        generate_phase_pair(3, 2, &mut stream(seed)).unwrap()
    }

    #[test]
    fn generated_rows_and_rewards_valid() {
        let pair = generate_phase_pair(7, 3, &mut stream(1)).unwrap();
        for m in [pair.phase_a(), pair.phase_b()] {
            for row in m.transitions().chunks(7) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert!(m.rewards().iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let x = generate_phase_pair(5, 2, &mut stream(42)).unwrap();
        let y = generate_phase_pair(5, 2, &mut stream(42)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn start_is_phase_a() {
        let pair = small_pair(3);
        for sched in [
            EnvironmentSchedule::periodic(pair.clone(), 10, 3, true).unwrap(),
            EnvironmentSchedule::random(pair.clone(), 10, 3, true, &mut stream(9)).unwrap(),
            EnvironmentSchedule::gradual(pair.clone(), 10, true).unwrap(),
        ] {
            assert_eq!(&sched.env_at(0).unwrap(), pair.phase_a());
        }
    }

    #[test]
    fn gradual_endpoint_is_phase_b() {
        let pair = small_pair(4);
        let sched = EnvironmentSchedule::gradual(pair.clone(), 17, true).unwrap();
        let end = sched.env_at(16).unwrap();
        assert_eq!(end.transitions(), pair.phase_b().transitions());
        assert_eq!(end.rewards(), pair.phase_b().rewards());
    }

    #[test]
    fn periodic_single_switch_midpoint() {
        let pair = small_pair(5);
        let sched = EnvironmentSchedule::periodic(pair.clone(), 100, 1, true).unwrap();
        assert_eq!(sched.switch_times(), &[50]);
        assert_eq!(&sched.env_at(49).unwrap(), pair.phase_a());
        assert_eq!(&sched.env_at(50).unwrap(), pair.phase_b());
        assert_eq!(&sched.env_at(99).unwrap(), pair.phase_b());
    }

    #[test]
    fn periodic_last_segment_absorbs_remainder() {
        let sched = EnvironmentSchedule::periodic(small_pair(5), 10, 2, true).unwrap();
        // Segment length ⌊10/3⌋ = 3: A on [0,3), B on [3,6), A on [6,10).
        assert_eq!(sched.switch_times(), &[3, 6]);
        assert_eq!(sched.snapshot_key(9).unwrap(), SnapshotKey::Phase(0));
    }

    #[test]
    fn stationary_rewards_when_not_varying() {
        let pair = small_pair(6);
        let sched = EnvironmentSchedule::periodic(pair.clone(), 20, 3, false).unwrap();
        for t in 0..20 {
            assert_eq!(sched.env_at(t).unwrap().rewards(), pair.phase_a().rewards());
        }
    }

    #[test]
    fn out_of_horizon() {
        let sched = EnvironmentSchedule::periodic(small_pair(1), 5, 0, false).unwrap();
        assert_eq!(sched.env_at(5), Err(Error::IndexOutOfHorizon { t: 5, horizon: 5 }));
        assert!(sched.step(7, 0, 0, &mut stream(0)).is_err());
    }

    #[test]
    fn invalid_modes_rejected() {
        let pair = small_pair(2);
        assert!(EnvironmentSchedule::periodic(pair.clone(), 5, 5, false).is_err());
        let bad = ScheduleMode::RandomAbrupt {
            switch_times: vec![3, 3],
        };
        assert!(EnvironmentSchedule::new(pair.clone(), 10, bad, false).is_err());
        let bad = ScheduleMode::RandomAbrupt { switch_times: vec![0] };
        assert!(EnvironmentSchedule::new(pair.clone(), 10, bad, false).is_err());
        let bad = ScheduleMode::RandomAbrupt { switch_times: vec![10] };
        assert!(EnvironmentSchedule::new(pair, 10, bad, false).is_err());
    }

    #[test]
    fn random_switch_times_sorted_in_range() {
        let sched = EnvironmentSchedule::random(small_pair(2), 50, 20, false, &mut stream(11)).unwrap();
        let st = sched.switch_times();
        assert_eq!(st.len(), 20);
        assert!(st.windows(2).all(|w| w[0] < w[1]));
        assert!(st.iter().all(|&t| (1..50).contains(&t)));
    }

    #[test]
    fn single_state_always_returns_zero() {
        let m = MdpSnapshot::new(1, 2, vec![1.0, 1.0], vec![0.5, 0.1], 1.0).unwrap();
        let sched = EnvironmentSchedule::stationary(m, 10);
        let mut rng = stream(3);
        for t in 0..10 {
            assert_eq!(sched.step(t, 0, 1, &mut rng).unwrap(), (0.1, 0));
        }
    }

    #[test]
    fn point_mass_row() {
        let p = vec![0.0, 0.0, 1.0, 0.2, 0.3, 0.5, 0.1, 0.1, 0.8];
        let m = MdpSnapshot::new(3, 1, p, vec![0.0; 3], 1.0).unwrap();
        let sched = EnvironmentSchedule::stationary(m, 1);
        let mut rng = stream(5);
        for _ in 0..1000 {
            assert_eq!(sched.step(0, 0, 0, &mut rng).unwrap().1, 2);
        }
    }

    #[test]
    fn inverse_cdf_skips_trailing_zero_mass() {
        assert_eq!(inverse_cdf([0.5, 0.5, 0.0].into_iter(), 0.999_999_999_999), 1);
        assert_eq!(inverse_cdf([0.3, 0.3, 0.3].into_iter(), 0.95), 2);
    }

    #[test]
    fn stationary_budget_zero() {
        let pair = small_pair(8);
        let b = EnvironmentSchedule::periodic(pair.clone(), 100, 0, true)
            .unwrap()
            .variation_budget();
        assert_eq!((b.delta_r, b.delta_p), (0.0, 0.0));
        let same = PhasePair::stationary(pair.phase_a().clone());
        let b = EnvironmentSchedule::periodic(same, 100, 9, true)
            .unwrap()
            .variation_budget();
        assert_eq!((b.delta_r, b.delta_p), (0.0, 0.0));
    }

    #[test]
    fn abrupt_budget_counts_switches() {
        let pair = small_pair(9);
        let dp = pair.phase_a().transition_distance(pair.phase_b());
        let dr = pair.phase_a().reward_distance(pair.phase_b());
        let b = EnvironmentSchedule::periodic(pair, 100, 7, true)
            .unwrap()
            .variation_budget();
        assert!((b.delta_p - 7.0 * dp).abs() < 1e-12);
        assert!((b.delta_r - 7.0 * dr).abs() < 1e-12);
        assert_eq!(b.delta_total, b.delta_r + b.delta_p);
    }

    #[test]
    fn json_round_trip() {
        let sched = EnvironmentSchedule::random(small_pair(12), 40, 5, true, &mut stream(1)).unwrap();
        let file = ScheduleFile::from_schedule(&sched, Some(12), Some("abc".into()));
        let back = ScheduleFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_schedule().unwrap(), sched);
    }

    #[test]
    fn json_rejects_malformed() {
        let sched = EnvironmentSchedule::periodic(small_pair(12), 40, 5, true).unwrap();
        let mut file = ScheduleFile::from_schedule(&sched, None, None);
        file.phase_a.transitions[0][0][0] += 0.5;
        assert!(file.to_schedule().is_err());
        let mut file = ScheduleFile::from_schedule(&sched, None, None);
        file.phase_b.rewards.pop();
        assert!(file.to_schedule().is_err());
        assert!(parse_schedule("{}").is_err());
        assert!(parse_schedule("not json").is_err());
    }
}
