use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn hiercontact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiercontact")).args(args).output().expect("binary runs")
}

fn lines(out: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

fn summary(out: &Output) -> Value {
    let all = lines(&out.stdout);
    let last = all.last().expect("at least one line").clone();
    assert_eq!(last["record"], "summary");
    last
}

#[test]
fn zero_replicas_is_a_usage_error() {
    let out = hiercontact(&["simulate", "--N", "2", "--n", "3", "--delta", "0.1", "--t", "5", "--replicas", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicas"));
}

#[test]
fn malformed_flags_exit_two() {
    assert_eq!(hiercontact(&["simulate", "--delta", "x"]).status.code(), Some(2));
    let bad_family = hiercontact(&["bounds", "--family", "bogus:1", "--delta", "0.1"]);
    assert_eq!(bad_family.status.code(), Some(2));
}

#[test]
fn zero_horizon_survives_surely() {
    let out = hiercontact(&["simulate", "--n", "3", "--delta", "0.1", "--t", "0", "--replicas", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let all = lines(&out.stdout);
    assert_eq!(all.len(), 21);
    assert!(all.iter().all(|l| l["schema_version"] == 1));
    assert_eq!(summary(&out)["p_hat"], 1.0);
}

#[test]
fn simulate_respects_survival_bound() {
    let out = hiercontact(&[
        "simulate", "--N", "2", "--n", "3", "--delta", "0.1", "--alpha", "geometric:0.5", "--t", "5", "--replicas",
        "20000", "--seed", "7", "--summary-only",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    let (p, se, b) = (s["p_hat"].as_f64().unwrap(), s["stderr"].as_f64().unwrap(), s["finite_survival_bound"].as_f64().unwrap());
    assert!(p >= b - 3.0 * se);
}

#[test]
fn same_seed_same_data() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = hiercontact(&[
            "simulate", "--N", "3", "--n", "2", "--delta", "0.4", "--t", "2", "--replicas", "200", "--seed", "11",
            "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
        let mut recs = lines(&fs::read(path).unwrap());
        for r in &mut recs {
            r.as_object_mut().unwrap().remove("wall_time");
        }
        recs
    };
    let a = run("a.jsonl");
    assert_eq!(a, run("b.jsonl"));
    let replicas: Vec<u64> = a[..200].iter().map(|r| r["replica"].as_u64().unwrap()).collect();
    assert_eq!(replicas, (0..200).collect::<Vec<_>>());
}

#[test]
fn default_verification_grid_passes() {
    let out = hiercontact(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(&out)["pass"], true);
}

#[test]
fn two_level_tables_at_quarter() {
    let out = hiercontact(&["verify", "--check", "two-level", "--xi", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let report = &lines(&out.stdout)[0];
    assert!(report["max_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn wrong_kernel_parameter_fails_intertwining() {
    let out = hiercontact(&[
        "verify", "--check", "intertwine", "--delta", "1", "--alpha", "explicit:2,1", "--xi-override", "0.4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("intertwine"));
    assert_eq!(summary(&out)["pass"], false);
}

#[test]
fn slow_decay_has_positive_verdict() {
    let out = hiercontact(&["bounds", "--family", "double_exp:1.5", "--N", "2", "--delta", "0.001"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["verdict"], "positive");
}

#[test]
fn fast_decay_bracket_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = hiercontact(&["bracket", "--family", "double_exp:3", "--N", "2", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let b = &lines(&out.stdout)[0];
    assert_eq!(b["lower"], 0.0);
    assert!(b["upper"].as_f64().unwrap() < 1e-6);
    let text = fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("family,lower,upper"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn compare_reports_smallest_sandwich() {
    let out = hiercontact(&["compare", "--N", "3", "--Nprime", "2.5"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    // 2.5^2 = 6.25 <= 2^3 <= 3^2 already holds at m = 2.
    assert_eq!((s["m"].as_u64(), s["n"].as_u64()), (Some(2), Some(3)));
    assert_eq!(hiercontact(&["compare", "--N", "3", "--Nprime", "3"]).status.code(), Some(1));
}

#[test]
fn coupling_conditional_law() {
    let out = hiercontact(&[
        "couple", "--delta", "1", "--alpha", "explicit:2,1", "--n", "2", "--t", "1", "--replicas", "20000", "--seed", "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["pass"], true);
}

#[test]
fn config_file_runs_and_bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("o.jsonl");
    let cfg = dir.path().join("cfg.json");
    let body = serde_json::json!({
        "command": "simulate",
        "model": {"N": 2, "delta": 0.5, "alpha": {"family": "geometric", "q": 0.5}},
        "n": 2, "t": 1.0, "replicas": 5, "seed": 3, "out": out_path,
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let out = hiercontact(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let recs = lines(&fs::read(&out_path).unwrap());
    assert_eq!(recs.len(), 6);
    assert_eq!(recs[5]["record"], "summary");

    fs::write(&cfg, r#"{"command": "simulate", "n": 2}"#).unwrap();
    assert_eq!(hiercontact(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}
