//! End-to-end checks of the `bilevel` binary: exit codes, output files and schemas.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bilevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilevel")).args(args).output().expect("spawn bilevel")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn list_shows_builtin_problems() {
    let out = bilevel(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert!(names.contains(&"QB") && names.contains(&"FS"), "{text}");
    assert!(text.contains("QB\tp=1\tn=4"), "{text}");
}

#[test]
fn solve_qb_matches_closed_form() {
    let out = bilevel(&["solve", "--problem", "QB", "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "solution-v1");
    assert_eq!(v["problem"], "QB");
    assert_eq!(v["sign"], "pessimistic");
    // 4 / (1 + 4ε) at ε = 0.1
    assert!((v["value"].as_f64().unwrap() - 4.0 / 1.4).abs() < 1e-6, "{v}");
    assert_eq!(v["converged"], true);
}

#[test]
fn unknown_problem_is_a_hard_error() {
    let out = bilevel(&["solve", "--problem", "nope", "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown problem 'nope'"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn non_positive_epsilon_is_rejected() {
    for eps in ["0", "-0.5"] {
        let out = bilevel(&["solve", "--problem", "QB", &format!("--epsilon={eps}")]);
        assert_eq!(out.status.code(), Some(1), "eps = {eps}");
        assert!(stderr(&out).contains("epsilon must be positive"), "{}", stderr(&out));
    }
}

#[test]
fn continuation_csv_has_header_and_one_row_per_epsilon() {
    let out = bilevel(&["continuation", "--problem", "QB", "--k", "4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("epsilon,"), "{header}");
    assert_eq!(lines.count(), 4);
}

#[test]
fn continuation_limit_needs_three_rows() {
    let out = bilevel(&["continuation", "--problem", "QB", "--k", "1", "--limit"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("need k ≥ 3"), "{}", stderr(&out));
}

#[test]
fn continuation_json_carries_monotone_and_limit() {
    let out = bilevel(&["continuation", "--problem", "QB", "--k", "6", "--limit"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "trace-v1");
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["monotone"]["ok"], true);
    let limit = v["limit"]["v_limit"].as_f64().unwrap();
    assert!((limit - 4.0).abs() < 0.05, "{limit}");
}

#[test]
fn oracle_writes_versioned_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = bilevel(&["oracle", "--problem", "QB", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&dir.path().join("oracle.json"));
    assert_eq!(v["schema"], "oracle-v1");
    assert_eq!(v["seed"], 0);
    assert!((v["beta_star"].as_f64().unwrap() - 4.0).abs() < 1e-9, "{v}");
    assert!((v["y_star"][0].as_f64().unwrap() - 0.5).abs() < 1e-3, "{v}");
}

#[test]
fn rates_on_qb_reports_h2_and_soft_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bilevel(&["rates", "--problem", "QB", "--output", d, "--format", "both"]);
    // the sublevel description of the oracle's solution set is not exact for QB
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning:"), "{}", stderr(&out));
    let v = read_json(&dir.path().join("rates.json"));
    assert_eq!(v["schema"], "rates-v1");
    assert_eq!(v["classification"], "consistent_H2");
    assert_eq!(v["diagnosis"], "H2");
    assert_eq!(v["certificate"]["valid"], false);
    let gaps = std::fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
    assert!(gaps.starts_with("epsilon,gap\n"), "{gaps}");
    assert_eq!(gaps.lines().count(), 11);
}

#[test]
fn rates_on_fs_detects_exact_selection() {
    let out = bilevel(&["rates", "--problem", "FS"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["classification"], "exact_selection");
    assert_eq!(v["certificate"]["valid"], true);
}

#[test]
fn exported_problem_reloads_to_identical_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(bilevel(&["export", "--problem", "QB", "--output", d]).status.code(), Some(0));
    let file = dir.path().join("QB.json");
    let args = |p: &str| vec!["solve".to_string(), "--problem".into(), p.into(), "--epsilon".into(), "0.05".into()];
    let a = bilevel(&args("QB").iter().map(String::as_str).collect::<Vec<_>>());
    let b = bilevel(&args(file.to_str().unwrap()).iter().map(String::as_str).collect::<Vec<_>>());
    let (a, b) = (stdout_json(&a), stdout_json(&b));
    assert_eq!(a["value"], b["value"]);
    assert_eq!(a["x"], b["x"]);
    assert_eq!(a["y"], b["y"]);
}

#[test]
fn registry_directory_adds_user_problems() {
    let dir = tempfile::tempdir().unwrap();
    let out = bilevel(&["export", "--problem", "FS"]);
    let mut doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    doc["name"] = "MyFS".into();
    std::fs::write(dir.path().join("myfs.json"), serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let d = dir.path().to_str().unwrap();

    let listed = String::from_utf8(bilevel(&["list", "--dir", d]).stdout).unwrap();
    assert!(listed.lines().any(|l| l.starts_with("MyFS\t")), "{listed}");

    let out = bilevel(&["solve", "--problem", "MyFS", "--registry", d, "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["problem"], "MyFS");
}

#[test]
fn malformed_problem_file_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, "{ \"name\": \"bad\" }").unwrap();
    let out = bilevel(&["solve", "--problem", file.to_str().unwrap(), "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
}

#[test]
fn same_seed_gives_identical_output() {
    let run = || bilevel(&["solve", "--problem", "QB", "--epsilon", "0.02", "--sign", "optimistic", "--seed", "7"]).stdout;
    assert_eq!(run(), run());
}
