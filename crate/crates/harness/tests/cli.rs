use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nsrl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsrl"))
        .args(args)
        .current_dir(dir)
        .env_remove("NSRL_SEED")
        .output()
        .expect("spawn nsrl")
}

fn config(algorithm: &str, extra: &str) -> String {
    format!(
        r#"{{"name": "run", "algorithm": "{algorithm}",
            "env": {{"n_states": 3, "n_actions": 2, "horizon": 1500, "mode": "periodic_abrupt", "n_switches": 2}},
            {extra}
            "seeds": [3, 4]}}"#
    )
}

fn setup(algorithm: &str, extra: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("config.json"), config(algorithm, extra)).unwrap();
    dir
}

fn csv_body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = setup("borl-ns-nac", r#""snapshot_every": 500,"#);
    let out = nsrl(&["run", "config.json", "--out", "o", "--jobs", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("o/run");
    for seed in [3, 4] {
        let s = run.join(format!("seed-{seed}"));
        for f in [
            "trace.csv",
            "regret.csv",
            "schedule.json",
            "summary.json",
            "epochs.csv",
            "snapshots.jsonl",
        ] {
            assert!(s.join(f).is_file(), "missing {f}");
        }
        assert_eq!(
            fs::read_to_string(s.join("snapshots.jsonl")).unwrap().lines().count(),
            3
        );
    }
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["per_seed"].as_array().unwrap().len(), 2);
    assert!(agg["std_regret"].as_f64().unwrap() >= 0.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("±"));
}

#[test]
fn config_hash_in_every_output() {
    let dir = setup("ns-nac", "");
    assert!(nsrl(&["run", "config.json", "--out", "o"], dir.path()).status.success());
    let s = dir.path().join("o/run/seed-3");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(s.join("summary.json")).unwrap()).unwrap();
    let hash = summary["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 16);
    for f in ["trace.csv", "regret.csv", "schedule.json"] {
        assert!(fs::read_to_string(s.join(f)).unwrap().contains(&hash), "{f}");
    }
}

#[test]
fn golden_headers() {
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/headers.txt")).unwrap();
    let expected = |name: &str| {
        golden
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{name}: ")))
            .unwrap()
            .to_string()
    };
    let dir = setup("ns-nac", "");
    assert!(nsrl(&["run", "config.json", "--out", "o"], dir.path()).status.success());
    let s = dir.path().join("o/run/seed-3");
    assert_eq!(csv_body(&s.join("trace.csv"))[0], expected("trace.csv"));
    assert_eq!(csv_body(&s.join("regret.csv"))[0], expected("regret.csv"));

    let base = config("ns-nac", "");
    fs::write(
        dir.path().join("sweep.json"),
        format!(r#"{{"base": {base}, "axis": "T", "values": [300, 600]}}"#),
    )
    .unwrap();
    let out = nsrl(&["sweep", "sweep.json", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_body(&dir.path().join("o/run/sweep.csv"));
    assert_eq!(rows[0], expected("sweep.csv"));
    assert_eq!(rows.len(), 1 + 2 * 2);
}

#[test]
fn alpha_above_half_exits_2_naming_field() {
    let dir = setup("ns-nac", r#""hyper": {"alpha": 0.7},"#);
    let out = nsrl(&["run", "config.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hyper.alpha") && err.contains("(0, 1/2)"), "{err}");
}

#[test]
fn missing_config_exits_1() {
    let dir = TempDir::new().unwrap();
    assert_eq!(nsrl(&["run", "nope.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn empty_sweep_exits_2() {
    let dir = TempDir::new().unwrap();
    let base = config("ns-nac", "");
    fs::write(
        dir.path().join("s.json"),
        format!(r#"{{"base": {base}, "axis": "n_switches", "values": []}}"#),
    )
    .unwrap();
    let out = nsrl(&["sweep", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = setup("ns-nac", "");
    for out in ["a", "b"] {
        assert!(nsrl(&["run", "config.json", "--out", out, "--jobs", "2"], dir.path())
            .status
            .success());
    }
    for f in ["trace.csv", "regret.csv", "schedule.json"] {
        let a = fs::read(dir.path().join("a/run/seed-4").join(f)).unwrap();
        let b = fs::read(dir.path().join("b/run/seed-4").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn regret_is_prefix_sum_of_trace() {
    let dir = setup("stationary-nac", "");
    assert!(nsrl(&["run", "config.json", "--out", "o"], dir.path()).status.success());
    let s = dir.path().join("o/run/seed-3");
    let trace = csv_body(&s.join("trace.csv"));
    let regret = csv_body(&s.join("regret.csv"));
    assert_eq!(trace.len(), regret.len());
    let mut cum = 0.0;
    for (tr, rg) in trace.iter().zip(&regret).skip(1) {
        let tr: Vec<&str> = tr.split(',').collect();
        let rg: Vec<f64> = rg.split(',').map(|x| x.parse().unwrap()).collect();
        let step = tr[4].parse::<f64>().unwrap() - tr[3].parse::<f64>().unwrap();
        cum += step;
        assert!((rg[1] - step).abs() < 1e-12);
        assert!((rg[2] - cum).abs() < 1e-9);
    }
}

#[test]
fn replay_reproduces_trace_with_verified_hash() {
    let dir = setup("ns-nac", r#""hyper": {"radius": 50.0},"#);
    assert!(nsrl(&["run", "config.json", "--out", "o"], dir.path()).status.success());
    let out = nsrl(
        &[
            "replay",
            "o/run/seed-4/schedule.json",
            "--algo",
            "ns-nac",
            "--seed",
            "4",
            "--config",
            "config.json",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reproduction verified"));
    assert_eq!(
        fs::read(dir.path().join("o/run/seed-4/trace.csv")).unwrap(),
        fs::read(dir.path().join("r/trace.csv")).unwrap()
    );

    // Trace on stdout when no output directory is given.
    let out = nsrl(
        &[
            "replay",
            "o/run/seed-4/schedule.json",
            "--algo",
            "ns-nac",
            "--seed",
            "4",
            "--config",
            "config.json",
        ],
        dir.path(),
    );
    assert_eq!(out.stdout, fs::read(dir.path().join("r/trace.csv")).unwrap());
}

#[test]
fn replay_rejects_mismatched_config() {
    let dir = setup("ns-nac", "");
    assert!(nsrl(&["run", "config.json", "--out", "o"], dir.path()).status.success());
    fs::write(
        dir.path().join("other.json"),
        config("ns-nac", r#""hyper": {"radius": 5.0},"#),
    )
    .unwrap();
    let out = nsrl(
        &[
            "replay",
            "o/run/seed-3/schedule.json",
            "--algo",
            "ns-nac",
            "--seed",
            "3",
            "--config",
            "other.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config_hash"));
}

#[test]
fn budget_prints_json() {
    let dir = setup("ns-nac", "");
    assert!(nsrl(&["run", "config.json", "--out", "o"], dir.path()).status.success());
    let out = nsrl(&["budget", "o/run/seed-3/schedule.json"], dir.path());
    assert!(out.status.success());
    let b: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/run/seed-3/summary.json")).unwrap()).unwrap();
    assert_eq!(b["delta_p"], summary["delta_p"]);
    assert_eq!(b["delta_r"].as_f64(), Some(0.0));
}

#[test]
fn seed_env_overrides_seed_list() {
    let dir = setup("ns-nac", "");
    let out = Command::new(env!("CARGO_BIN_EXE_nsrl"))
        .args(["run", "config.json", "--out", "o"])
        .current_dir(dir.path())
        .env("NSRL_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    let run = dir.path().join("o/run");
    assert!(run.join("seed-11").is_dir());
    assert!(!run.join("seed-3").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_nsrl"))
        .args(["run", "config.json", "--out", "o"])
        .current_dir(dir.path())
        .env("NSRL_SEED", "x")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_schedule_exits_2() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), r#"{"format": "nsrl-schedule/1"}"#).unwrap();
    assert_eq!(nsrl(&["budget", "s.json"], dir.path()).status.code(), Some(2));
}

/// Two absorbing states with different rewards: no single optimal gain, so
/// the oracle's certificate cannot be met.
#[test]
fn multichain_schedule_exits_3() {
    let n = 13;
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..n {
        let mut row = vec![0.0; n];
        match s {
            0 | 1 => row[s] = 1.0,
            _ => {
                row[0] = 0.5;
                row[1] = 0.5;
            }
        }
        transitions.push(vec![row]);
        rewards.push(vec![if s == 0 { 1.0 } else { 0.0 }]);
    }
    let phase = serde_json::json!({"transitions": transitions, "rewards": rewards});
    let doc = serde_json::json!({
        "format": "nsrl-schedule/1", "horizon": 50, "n_states": n, "n_actions": 1,
        "reward_bound": 1.0, "vary_rewards": false,
        "mode": {"kind": "periodic_abrupt", "n_switches": 0},
        "phase_a": phase, "phase_b": phase,
    });
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), doc.to_string()).unwrap();
    let out = nsrl(&["replay", "s.json", "--algo", "ns-nac", "--seed", "0"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
