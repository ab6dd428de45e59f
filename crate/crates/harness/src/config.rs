//! Run and sweep configuration documents.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nsrl_core::nac::{ProjectionScope, RestartState};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ns-nac")]
    NsNac,
    #[serde(rename = "borl-ns-nac")]
    BorlNsNac,
    /// NS-NAC with a single segment (no restarts).
    #[serde(rename = "stationary-nac")]
    StationaryNac,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NsNac => "ns-nac",
            Algorithm::BorlNsNac => "borl-ns-nac",
            Algorithm::StationaryNac => "stationary-nac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ns-nac" => Some(Algorithm::NsNac),
            "borl-ns-nac" => Some(Algorithm::BorlNsNac),
            "stationary-nac" => Some(Algorithm::StationaryNac),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    PeriodicAbrupt,
    RandomAbrupt,
    Gradual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub mode: ModeKind,
    #[serde(default)]
    pub n_switches: usize,
    #[serde(default)]
    pub vary_rewards: bool,
}

/// Optional overrides of the budget-derived defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionScope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_state: Option<RestartState>,
}

/// Largest `|S|·|A|·|S|` accepted from a config; keeps one phase table
/// under ~128 MiB.
pub const MAX_TABLE_ENTRIES: usize = 1 << 24;
pub const MAX_HORIZON: usize = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: Algorithm,
    pub env: EnvConfig,
    #[serde(default)]
    pub hyper: HyperOverrides,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Dump policy and critic every this many steps (disabled when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{field}: {msg}"))
}

fn check_open_half(field: &str, v: Option<f64>) -> Result<(), HarnessError> {
    match v {
        Some(x) if !(x > 0.0 && x < 0.5) => Err(invalid(
            field,
            format_args!("{x} must lie in the open interval (0, 1/2)"),
        )),
        _ => Ok(()),
    }
}

fn check_positive(field: &str, v: Option<f64>) -> Result<(), HarnessError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(invalid(field, format_args!("{x} must be positive"))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.name.is_empty()
            || self
                .name
                .chars()
                .any(|c| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
            || self.name.starts_with('.')
        {
            return Err(invalid("name", "must be a non-empty [A-Za-z0-9._-] identifier"));
        }
        let env = &self.env;
        if env.n_states == 0 {
            return Err(invalid("env.n_states", "must be at least 1"));
        }
        if env.n_actions == 0 {
            return Err(invalid("env.n_actions", "must be at least 1"));
        }
        let table = env
            .n_states
            .checked_mul(env.n_states)
            .and_then(|x| x.checked_mul(env.n_actions));
        if table.is_none_or(|x| x > MAX_TABLE_ENTRIES) {
            return Err(invalid("env", "state/action space too large"));
        }
        if env.horizon == 0 || env.horizon > MAX_HORIZON {
            return Err(invalid("env.horizon", format_args!("must lie in [1, {MAX_HORIZON}]")));
        }
        match env.mode {
            ModeKind::PeriodicAbrupt | ModeKind::RandomAbrupt
                if env.n_switches > 0 && env.n_switches >= env.horizon =>
            {
                return Err(invalid(
                    "env.n_switches",
                    format_args!(
                        "{} switches need a horizon of at least {}",
                        env.n_switches,
                        env.n_switches + 1
                    ),
                ));
            }
            ModeKind::Gradual if env.n_switches != 0 => {
                return Err(invalid("env.n_switches", "not used by the gradual mode; omit it"));
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        if self.snapshot_every == Some(0) {
            return Err(invalid("snapshot_every", "must be positive"));
        }

        let h = &self.hyper;
        check_open_half("hyper.alpha", h.alpha)?;
        check_open_half("hyper.beta", h.beta)?;
        check_open_half("hyper.gamma", h.gamma)?;
        check_positive("hyper.radius", h.radius)?;
        check_positive("hyper.xi", h.xi)?;
        check_positive("hyper.sigma", h.sigma)?;
        if let Some(z) = h.zeta {
            if !(z > 0.0 && z < 1.0) {
                return Err(invalid("hyper.zeta", format_args!("{z} must lie in (0, 1)")));
            }
        }
        if let Some(n) = h.n_restarts {
            if !(1..=env.horizon).contains(&n) {
                return Err(invalid(
                    "hyper.n_restarts",
                    format_args!("{n} must lie in [1, {}]", env.horizon),
                ));
            }
            if self.algorithm == Algorithm::StationaryNac && n != 1 {
                return Err(invalid(
                    "hyper.n_restarts",
                    "stationary-nac always uses a single segment",
                ));
            }
        }
        if let Some(w) = h.epoch_len {
            if !(1..=env.horizon).contains(&w) {
                return Err(invalid(
                    "hyper.epoch_len",
                    format_args!("{w} must lie in [1, {}]", env.horizon),
                ));
            }
        }
        let unused: &[(&str, bool)] = match self.algorithm {
            Algorithm::BorlNsNac => &[
                ("hyper.alpha", h.alpha.is_some()),
                ("hyper.beta", h.beta.is_some()),
                ("hyper.gamma", h.gamma.is_some()),
                ("hyper.n_restarts", h.n_restarts.is_some()),
            ],
            Algorithm::NsNac | Algorithm::StationaryNac => &[
                ("hyper.epoch_len", h.epoch_len.is_some()),
                ("hyper.xi", h.xi.is_some()),
                ("hyper.sigma", h.sigma.is_some()),
                ("hyper.zeta", h.zeta.is_some()),
            ],
        };
        if let Some((field, _)) = unused.iter().find(|(_, set)| *set) {
            return Err(invalid(field, format_args!("not used by {}", self.algorithm.name())));
        }
        if self.algorithm == Algorithm::BorlNsNac && env.horizon < 2 {
            return Err(invalid("env.horizon", "borl-ns-nac needs a horizon of at least 2"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the configuration with seeds and output location
    /// removed, identifying the experimental setup.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.seeds.clear();
        canonical.out_dir = None;
        canonical.snapshot_every = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))[..16].to_string()
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    Horizon,
    NSwitches,
    NStates,
    NActions,
    Hyper(String),
}

const HYPER_AXES: [&str; 9] = [
    "alpha",
    "beta",
    "gamma",
    "n_restarts",
    "radius",
    "epoch_len",
    "xi",
    "sigma",
    "zeta",
];

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "T" | "horizon" => Some(SweepAxis::Horizon),
            "n_switches" => Some(SweepAxis::NSwitches),
            "n_states" | "S" => Some(SweepAxis::NStates),
            "n_actions" | "A" => Some(SweepAxis::NActions),
            other => other
                .strip_prefix("hyper:")
                .filter(|name| HYPER_AXES.contains(name))
                .map(|name| SweepAxis::Hyper(name.to_string())),
        }
    }

    /// Applies one axis value to a copy of `base`.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, HarnessError> {
        let mut c = base.clone();
        let as_count = |field: &str| -> Result<usize, HarnessError> {
            if value.fract() != 0.0 || value.is_nan() || value < 0.0 || value > MAX_HORIZON as f64 {
                return Err(invalid(field, format_args!("{value} is not a non-negative integer")));
            }
            Ok(value as usize)
        };
        match self {
            SweepAxis::Horizon => c.env.horizon = as_count("values")?,
            SweepAxis::NSwitches => c.env.n_switches = as_count("values")?,
            SweepAxis::NStates => c.env.n_states = as_count("values")?,
            SweepAxis::NActions => c.env.n_actions = as_count("values")?,
            SweepAxis::Hyper(name) => {
                let h = &mut c.hyper;
                match name.as_str() {
                    "alpha" => h.alpha = Some(value),
                    "beta" => h.beta = Some(value),
                    "gamma" => h.gamma = Some(value),
                    "radius" => h.radius = Some(value),
                    "xi" => h.xi = Some(value),
                    "sigma" => h.sigma = Some(value),
                    "zeta" => h.zeta = Some(value),
                    "n_restarts" => h.n_restarts = Some(as_count("values")?),
                    "epoch_len" => h.epoch_len = Some(as_count("values")?),
                    _ => unreachable!("axis names are checked on parse"),
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axis: String,
    pub values: Vec<f64>,
    /// Replaces the base config's seeds when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Also write the per-run trace/regret/schedule/summary files.
    #[serde(default)]
    pub write_runs: bool,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let axis = self.parsed_axis()?;
        if self.values.is_empty() {
            return Err(invalid("values", "sweep axis has no values"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return Err(invalid("seeds", "at least one seed is required"));
            }
        }
        self.base.validate()?;
        for &v in &self.values {
            axis.apply(&self.base, v)?;
        }
        Ok(())
    }

    pub fn parsed_axis(&self) -> Result<SweepAxis, HarnessError> {
        SweepAxis::parse(&self.axis).ok_or_else(|| {
            invalid(
                "axis",
                format_args!(
                    "unknown axis {:?}; expected T, n_switches, n_states, n_actions or hyper:<name>",
                    self.axis
                ),
            )
        })
    }

    pub fn seeds(&self) -> &[u64] {
        self.seeds.as_deref().unwrap_or(&self.base.seeds)
    }
}
