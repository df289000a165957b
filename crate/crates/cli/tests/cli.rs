use std::path::PathBuf;
use std::process::{Command, Output};

fn vlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlp")).args(args).output().expect("failed to run vlp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vlp-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn solve_reports_allocation() {
    let o = vlp(&["solve", "--total-power", "1600"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("status: optimal"), "{s}");
    assert!(s.contains("148.318"), "{s}");
}

#[test]
fn infeasible_budget_exits_two() {
    let o = vlp(&["solve", "--total-power", "300"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("infeasible"));
}

#[test]
fn crlb_of_uniform_power() {
    let o = vlp(&["crlb", "--power", "400", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let line = s.lines().nth(1).unwrap();
    let v: f64 = line.split(',').next().unwrap().parse().unwrap();
    assert!((v - 4.417629327e-3).abs() < 1e-11, "{v}");
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(vlp(&["--bogus"]).status.code(), Some(64));
    assert_eq!(vlp(&["solve", "--delta", "0.1", "--delta-relative", "0.1"]).status.code(), Some(64));
    assert_eq!(vlp(&["--help"]).status.code(), Some(0));
    assert_eq!(vlp(&["--version"]).status.code(), Some(0));
}

#[test]
fn missing_scenario_is_an_error() {
    let o = vlp(&["--scenario", "/nonexistent/file.scenario", "solve"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn manifest_written_with_out() {
    let dir = scratch_dir("manifest");
    let o = vlp(&["solve", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenario"], "builtin:reference");
    assert_eq!(m["seed"], 0);
    assert!(m["scenario_sha256"].as_str().unwrap().len() == 64);
    assert!(m["backend"]["id"].is_string());
    assert!(dir.join("result.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn experiment_csv_independent_of_threads() {
    let run = |threads: &str| {
        let o = vlp(&[
            "experiment",
            "--protocol",
            "compare",
            "--delta",
            "0.2",
            "--n-feasible",
            "8",
            "--seed",
            "3",
            "--threads",
            threads,
            "--format",
            "csv",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let a = run("1");
    assert!(a.lines().count() > 8);
    assert_eq!(a, run("8"));
}

#[test]
fn sweep_csv_has_header() {
    let o = vlp(&["experiment", "--protocol", "sweep", "--axis", "eps", "--grid", "0.04,0.1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("axis,value,strategy,status,objective,p"));
    assert!(s.contains("sqrt_eps,0.04,optimal,infeasible"));
}
