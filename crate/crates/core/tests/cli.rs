use std::path::PathBuf;
use std::process::{Command, Output};

use ftsim::harness::{parse_csv, RunStatus};

fn ftsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftsim")).args(args).output().unwrap()
}

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(rel)
        .display()
        .to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ftsim-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn plan_prints_json() {
    let out = ftsim(&[
        "plan",
        "--preset",
        "worst_case_shrink",
        "--p",
        "8",
        "--k",
        "2",
        "--spacing",
        "3",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        v,
        serde_json::json!([{"rank": 7, "outer_iteration": 1}, {"rank": 6, "outer_iteration": 4}])
    );
}

#[test]
fn config_errors_exit_2() {
    let out = ftsim(&["plan", "--preset", "best_case", "--p", "8", "--k", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ftsim(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn run_prints_one_row() {
    let out = ftsim(&["run", "--config", &data("sweep/substitute_k2.json")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        (rows[0].strategy.as_str(), rows[0].failures, rows[0].status),
        ("substitute", 2, RunStatus::Converged)
    );
    assert!(rows[0].slowdown > 1.0);
}

#[test]
fn unrecoverable_run_exits_3() {
    let dir = scratch("fatal");
    let plan = dir.join("plan.json");
    // rank 3 together with its only buddy
    std::fs::write(
        &plan,
        r#"[{"rank": 3, "outer_iteration": 2}, {"rank": 4, "outer_iteration": 2}]"#,
    )
    .unwrap();
    let out = ftsim(&[
        "run",
        "--config",
        &data("sweep/shrink_k0.json"),
        "--plan",
        plan.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows[0].status, RunStatus::Unrecoverable);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_matches_golden() {
    let dir = scratch("sweep");
    let out_csv = dir.join("out.csv");
    let out = ftsim(&["sweep", "--configs", &data("sweep"), "--out", out_csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(&out_csv).unwrap();
    assert_eq!(got, std::fs::read_to_string(data("sweep_golden.csv")).unwrap());
    assert!(String::from_utf8_lossy(&out.stderr).contains("slow_shr"));
    std::fs::remove_dir_all(&dir).unwrap();
}
