//! CSV and JSON artifacts.
//!
//! Every CSV starts with a single `#` provenance line carrying the config
//! hash, followed by the header row.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use nsrl_core::oracle::Regret;
use nsrl_core::trace::{EpochSummary, RunTrace};

use crate::error::HarnessError;
use crate::runner::{SeedOutcome, Snapshot};

pub const TRACE_HEADER: [&str; 8] = ["t", "state", "action", "reward", "j_star", "eta", "segment", "arm"];
pub const REGRET_HEADER: [&str; 3] = ["t", "step_regret", "cum_regret"];
pub const SWEEP_HEADER: [&str; 7] = ["axis", "value", "seed", "delta_r", "delta_p", "final_regret", "wall_ms"];
pub const SWEEP_SUMMARY_HEADER: [&str; 5] = ["axis", "value", "n_seeds", "mean_regret", "std_regret"];
pub const EPOCH_HEADER_PREFIX: [&str; 5] = ["epoch", "arm", "hypothesized_delta", "epoch_reward", "steps"];

pub fn provenance_line(config_hash: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# nsrl config_hash={config_hash} seed={s}"),
        None => format!("# nsrl config_hash={config_hash}"),
    }
}

pub fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, &(text + "\n"))
}

/// CSV writer preceded by the provenance line.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    label: String,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path, provenance: &str, header: &[&str]) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        Self::new(BufWriter::new(file), path.display().to_string(), provenance, header)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut inner: W, label: String, provenance: &str, header: &[&str]) -> Result<Self, HarnessError> {
        writeln!(inner, "{provenance}").map_err(|e| HarnessError::Io(format!("{label}: {e}")))?;
        let mut sink = Self {
            writer: csv::Writer::from_writer(inner),
            label,
        };
        sink.row(header.iter().copied())?;
        Ok(sink)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), HarnessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", self.label)))
    }

    pub fn flush(&mut self) -> Result<(), HarnessError> {
        self.writer
            .flush()
            .map_err(|e| HarnessError::Io(format!("{}: {e}", self.label)))
    }
}

pub fn write_trace_to<W: Write>(
    sink: &mut CsvSink<W>,
    trace: &RunTrace,
    benchmark: &[f64],
) -> Result<(), HarnessError> {
    for (r, j) in trace.records.iter().zip(benchmark) {
        sink.row([
            r.t.to_string(),
            r.state.to_string(),
            r.action.to_string(),
            r.reward.to_string(),
            j.to_string(),
            r.eta.to_string(),
            r.segment.to_string(),
            r.arm.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    sink.flush()
}

pub fn write_trace(path: &Path, provenance: &str, trace: &RunTrace, benchmark: &[f64]) -> Result<(), HarnessError> {
    let mut sink = CsvSink::create(path, provenance, &TRACE_HEADER)?;
    write_trace_to(&mut sink, trace, benchmark)
}

pub fn write_regret(path: &Path, provenance: &str, regret: &Regret) -> Result<(), HarnessError> {
    let mut sink = CsvSink::create(path, provenance, &REGRET_HEADER)?;
    for (t, (step, cum)) in regret.step.iter().zip(&regret.cumulative).enumerate() {
        sink.row([t.to_string(), step.to_string(), cum.to_string()])?;
    }
    sink.flush()
}

pub fn write_epochs(path: &Path, provenance: &str, epochs: &[EpochSummary]) -> Result<(), HarnessError> {
    let n_arms = epochs.first().map_or(0, |e| e.probs.len());
    let mut header: Vec<String> = EPOCH_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((0..n_arms).map(|k| format!("p_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut sink = CsvSink::create(path, provenance, &header)?;
    for e in epochs {
        let mut row = vec![
            e.epoch.to_string(),
            e.arm.to_string(),
            e.hypothesized_delta.to_string(),
            e.epoch_reward.to_string(),
            e.steps.to_string(),
        ];
        row.extend(e.probs.iter().map(f64::to_string));
        sink.row(row)?;
    }
    sink.flush()
}

#[derive(Serialize)]
struct SnapshotLine<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    snapshot: &'a Snapshot,
}

pub fn write_snapshots(path: &Path, config_hash: &str, snapshots: &[Snapshot]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for snapshot in snapshots {
        let line = serde_json::to_string(&SnapshotLine { config_hash, snapshot }).expect("snapshot serializes");
        writeln!(out, "{line}").map_err(|e| HarnessError::io(path, e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

/// Per-seed `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub config_hash: String,
    pub name: String,
    pub algorithm: String,
    pub seed: u64,
    pub horizon: usize,
    pub total_regret: f64,
    pub total_reward: f64,
    pub benchmark_total: f64,
    pub delta_r: f64,
    pub delta_p: f64,
    pub delta_total: f64,
    pub switch_times: Vec<usize>,
    pub wall_ms: f64,
}

impl SeedSummary {
    pub fn new(name: &str, algorithm: &str, config_hash: &str, o: &SeedOutcome) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            name: name.to_string(),
            algorithm: algorithm.to_string(),
            seed: o.seed,
            horizon: o.schedule.horizon(),
            total_regret: o.regret.total,
            total_reward: o.trace.total_reward(),
            benchmark_total: o.benchmark.iter().sum(),
            delta_r: o.budget.delta_r,
            delta_p: o.budget.delta_p,
            delta_total: o.budget.delta_total,
            switch_times: o.schedule.switch_times().to_vec(),
            wall_ms: o.wall_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRegret {
    pub seed: u64,
    pub total_regret: f64,
}

/// Cross-seed `aggregate.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub config_hash: String,
    pub name: String,
    pub algorithm: String,
    pub per_seed: Vec<SeedRegret>,
    pub mean_regret: f64,
    /// Sample standard deviation across seeds.
    pub std_regret: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nsrl_core::trace::StepRecord;

    #[test]
    fn trace_rows_leave_arm_empty_without_bandit() {
        let trace = RunTrace {
            records: vec![StepRecord {
                t: 0,
                state: 1,
                action: 0,
                reward: 0.5,
                eta: 0.0,
                segment: 0,
                arm: None,
            }],
            epochs: Vec::new(),
        };
        let mut buf = Vec::new();
        let mut sink = CsvSink::new(&mut buf, "mem".into(), "# nsrl config_hash=abc", &TRACE_HEADER).unwrap();
        write_trace_to(&mut sink, &trace, &[0.75]).unwrap();
        drop(sink);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# nsrl config_hash=abc\nt,state,action,reward,j_star,eta,segment,arm\n0,1,0,0.5,0.75,0,0,\n"
        );
    }
}
