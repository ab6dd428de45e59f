//! `nsrl` subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use nsrl_core::env::{ScheduleFile, TransitionNorm};
use nsrl_core::oracle::{benchmark_series, dynamic_regret};

use crate::config::{Algorithm, ExperimentConfig, SweepSpec};
use crate::error::HarnessError;
use crate::output::{self, Aggregate, CsvSink, SeedRegret, SeedSummary};
use crate::runner::{mean_std, run_on_schedule, run_seed, SeedOutcome};

pub const SEED_ENV: &str = "NSRL_SEED";
const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "nsrl", version, about = "Non-stationary actor-critic experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every seed of a configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one parameter of a base configuration.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a learner on a saved schedule.
    Replay {
        schedule: PathBuf,
        #[arg(long)]
        algo: String,
        #[arg(long)]
        seed: u64,
        /// Configuration whose hyperparameter overrides to apply; its hash
        /// is checked against the schedule's.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write trace/regret/summary here instead of the trace to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the variation budget of a saved schedule as JSON.
    Budget {
        schedule: PathBuf,
        #[arg(long, value_enum, default_value = "row-l1")]
        norm: NormArg,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum NormArg {
    RowL1,
    ElementwiseMax,
}

impl From<NormArg> for TransitionNorm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::RowL1 => TransitionNorm::RowL1,
            NormArg::ElementwiseMax => TransitionNorm::ElementwiseMax,
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, jobs, out } => cmd_run(&config, jobs, out.as_deref()),
        Command::Sweep { spec, jobs, out } => cmd_sweep(&spec, jobs, out.as_deref()),
        Command::Replay {
            schedule,
            algo,
            seed,
            config,
            out,
        } => cmd_replay(&schedule, &algo, seed, config.as_deref(), out.as_deref()),
        Command::Budget { schedule, norm } => cmd_budget(&schedule, norm.into()),
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Seeds from `NSRL_SEED` (comma-separated) if set, else `fallback`.
pub fn seeds_from_env(fallback: &[u64]) -> Result<Vec<u64>, HarnessError> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => {
            let seeds: Result<Vec<u64>, _> = raw.split(',').map(|s| s.trim().parse::<u64>()).collect();
            match seeds {
                Ok(s) if !s.is_empty() => Ok(s),
                _ => Err(HarnessError::Config(format!(
                    "{SEED_ENV}: {raw:?} is not a comma-separated list of seeds"
                ))),
            }
        }
        Err(_) => Ok(fallback.to_vec()),
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    if jobs == Some(0) {
        return Err(HarnessError::Config("--jobs: must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Io(format!("thread pool: {e}")))
}

/// Writes `<dir>/{trace,regret}.csv`, `schedule.json`, `summary.json`, plus
/// `epochs.csv` for bandit runs and `snapshots.jsonl` when enabled.
pub fn write_seed_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    hash: &str,
    outcome: &SeedOutcome,
) -> Result<SeedSummary, HarnessError> {
    output::create_dir(dir)?;
    let provenance = output::provenance_line(hash, Some(outcome.seed));
    output::write_trace(&dir.join("trace.csv"), &provenance, &outcome.trace, &outcome.benchmark)?;
    output::write_regret(&dir.join("regret.csv"), &provenance, &outcome.regret)?;
    let schedule = ScheduleFile::from_schedule(&outcome.schedule, Some(outcome.seed), Some(hash.to_string()));
    output::write_text(&dir.join("schedule.json"), &(schedule.to_json() + "\n"))?;
    if !outcome.trace.epochs.is_empty() {
        output::write_epochs(&dir.join("epochs.csv"), &provenance, &outcome.trace.epochs)?;
    }
    if config.snapshot_every.is_some() {
        output::write_snapshots(&dir.join("snapshots.jsonl"), hash, &outcome.snapshots)?;
    }
    let summary = SeedSummary::new(&config.name, config.algorithm.name(), hash, outcome);
    output::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_run(path: &Path, jobs: Option<usize>, out: Option<&Path>) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::from_json(&read(path)?)?;
    config.seeds = seeds_from_env(&config.seeds)?;
    let root = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let run_dir = root.join(&config.name);
    output::create_dir(&run_dir)?;
    let hash = config.config_hash();
    output::write_json(&run_dir.join("config.json"), &config)?;

    let summaries: Vec<SeedSummary> = pool(jobs)?.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let outcome = run_seed(&config, seed)?;
                write_seed_artifacts(&run_dir.join(format!("seed-{seed}")), &config, &hash, &outcome)
            })
            .collect::<Result<_, _>>()
    })?;

    let regrets: Vec<f64> = summaries.iter().map(|s| s.total_regret).collect();
    let (mean, std) = mean_std(&regrets);
    for s in &summaries {
        println!(
            "{} seed={} regret={:.3} delta_r={:.4} delta_p={:.4} wall_ms={:.1}",
            config.name, s.seed, s.total_regret, s.delta_r, s.delta_p, s.wall_ms
        );
    }
    println!(
        "{} {} regret {mean:.3} ± {std:.3} over {} seed(s)",
        config.name,
        config.algorithm.name(),
        regrets.len()
    );
    let aggregate = Aggregate {
        config_hash: hash,
        name: config.name.clone(),
        algorithm: config.algorithm.name().to_string(),
        per_seed: summaries
            .iter()
            .map(|s| SeedRegret {
                seed: s.seed,
                total_regret: s.total_regret,
            })
            .collect(),
        mean_regret: mean,
        std_regret: std,
    };
    output::write_json(&run_dir.join("aggregate.json"), &aggregate)
}

/// Row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub delta_r: f64,
    pub delta_p: f64,
    pub final_regret: f64,
    pub wall_ms: f64,
}

fn sweep_hash(spec: &SweepSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("sweep serializes");
    hex::encode(Sha256::digest(&bytes))[..16].to_string()
}

pub fn cmd_sweep(path: &Path, jobs: Option<usize>, out: Option<&Path>) -> Result<(), HarnessError> {
    let mut spec = SweepSpec::from_json(&read(path)?)?;
    let seeds = seeds_from_env(spec.seeds())?;
    spec.seeds = Some(seeds.clone());
    let axis = spec.parsed_axis()?;
    let root = out
        .map(Path::to_path_buf)
        .or_else(|| spec.out_dir.as_ref().map(PathBuf::from))
        .or_else(|| spec.base.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let dir = root.join(&spec.base.name);
    output::create_dir(&dir)?;
    let hash = sweep_hash(&spec);
    output::write_json(&dir.join("sweep.json"), &spec)?;

    let configs: Vec<ExperimentConfig> = spec
        .values
        .iter()
        .map(|&v| axis.apply(&spec.base, v))
        .collect::<Result<_, _>>()?;
    let jobs_list: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();

    let csv_path = dir.join("sweep.csv");
    let sink = Mutex::new(CsvSink::create(
        &csv_path,
        &output::provenance_line(&hash, None),
        &output::SWEEP_HEADER,
    )?);
    let rows: Vec<SweepRow> = pool(jobs)?.install(|| {
        jobs_list
            .par_iter()
            .map(|&(i, seed)| {
                let config = &configs[i];
                let outcome = run_seed(config, seed)?;
                if spec.write_runs {
                    let run_dir = dir.join(format!("{}={}", spec.axis.replace(':', "-"), spec.values[i]));
                    write_seed_artifacts(
                        &run_dir.join(format!("seed-{seed}")),
                        config,
                        &config.config_hash(),
                        &outcome,
                    )?;
                }
                let row = SweepRow {
                    value: spec.values[i],
                    seed,
                    delta_r: outcome.budget.delta_r,
                    delta_p: outcome.budget.delta_p,
                    final_regret: outcome.regret.total,
                    wall_ms: outcome.wall_ms,
                };
                let mut sink = sink.lock().expect("sweep sink poisoned");
                sink.row([
                    spec.axis.clone(),
                    row.value.to_string(),
                    row.seed.to_string(),
                    row.delta_r.to_string(),
                    row.delta_p.to_string(),
                    row.final_regret.to_string(),
                    format!("{:.3}", row.wall_ms),
                ])?;
                sink.flush()?;
                Ok(row)
            })
            .collect::<Result<_, HarnessError>>()
    })?;

    let mut summary = CsvSink::create(
        &dir.join("sweep_summary.csv"),
        &output::provenance_line(&hash, None),
        &output::SWEEP_SUMMARY_HEADER,
    )?;
    for &v in &spec.values {
        let regrets: Vec<f64> = rows.iter().filter(|r| r.value == v).map(|r| r.final_regret).collect();
        let (mean, std) = mean_std(&regrets);
        println!(
            "{}={v} regret {mean:.3} ± {std:.3} over {} seed(s)",
            spec.axis,
            regrets.len()
        );
        summary.row([
            spec.axis.clone(),
            v.to_string(),
            regrets.len().to_string(),
            mean.to_string(),
            std.to_string(),
        ])?;
    }
    summary.flush()
}

#[derive(Serialize)]
struct ReplaySummary {
    config_hash: Option<String>,
    algorithm: String,
    seed: u64,
    horizon: usize,
    total_regret: f64,
    verified: bool,
}

pub fn cmd_replay(
    schedule_path: &Path,
    algo: &str,
    seed: u64,
    config_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), HarnessError> {
    let algorithm =
        Algorithm::parse(algo).ok_or_else(|| HarnessError::Config(format!("--algo: unknown algorithm {algo:?}")))?;
    let file = ScheduleFile::from_json(&read(schedule_path)?)?;
    let schedule = file.to_schedule()?;

    let mut hyper = Default::default();
    let mut verified = false;
    if let Some(path) = config_path {
        let config = ExperimentConfig::from_json(&read(path)?)?;
        let hash = config.config_hash();
        if let Some(expected) = &file.config_hash {
            if *expected != hash {
                return Err(HarnessError::Config(format!(
                    "config_hash: schedule was produced by {expected}, supplied config hashes to {hash}"
                )));
            }
            verified = config.algorithm == algorithm && file.seed == Some(seed);
        }
        hyper = config.hyper;
    }

    let benchmark = benchmark_series(&schedule)?;
    let (trace, _) = run_on_schedule(algorithm, &hyper, &schedule, seed, None)?;
    let regret = dynamic_regret(&trace, &benchmark)?;
    let hash_label = file.config_hash.clone().unwrap_or_else(|| "unknown".into());
    let provenance = output::provenance_line(&hash_label, Some(seed));

    if verified {
        eprintln!("reproduction verified against config hash {hash_label}");
    } else {
        eprintln!("replay not verified: supply the original --config, --algo and --seed to verify");
    }
    match out {
        Some(dir) => {
            output::create_dir(dir)?;
            output::write_trace(&dir.join("trace.csv"), &provenance, &trace, &benchmark)?;
            output::write_regret(&dir.join("regret.csv"), &provenance, &regret)?;
            output::write_json(
                &dir.join("summary.json"),
                &ReplaySummary {
                    config_hash: file.config_hash.clone(),
                    algorithm: algorithm.name().to_string(),
                    seed,
                    horizon: schedule.horizon(),
                    total_regret: regret.total,
                    verified,
                },
            )?;
            println!("{} seed={seed} regret={:.3}", algorithm.name(), regret.total);
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut sink = CsvSink::new(stdout.lock(), "stdout".into(), &provenance, &output::TRACE_HEADER)?;
            output::write_trace_to(&mut sink, &trace, &benchmark)
        }
    }
}

pub fn cmd_budget(path: &Path, norm: TransitionNorm) -> Result<(), HarnessError> {
    let schedule = ScheduleFile::from_json(&read(path)?)?.to_schedule()?;
    let budget = schedule.variation_budget_with(norm);
    let text = serde_json::to_string_pretty(&budget).expect("budget serializes");
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{text}").map_err(|e| HarnessError::Io(format!("stdout: {e}")))
}
