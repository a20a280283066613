use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn mdpwf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdpwf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn mdpwf_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mdpwf"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn investment(dir: &TempDir) -> String {
    let file = path(dir, "investment.json");
    let o = mdpwf(&["gen", "--out", &file, "builtin", "investment"]);
    assert!(o.status.success(), "{}", stderr(&o));
    file
}

#[test]
fn optimize_exact_prints_kappa_and_welfare() {
    let dir = TempDir::new().unwrap();
    let model = investment(&dir);
    let o = mdpwf(&["optimize", &model, "--exact"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("kappa 2\n"), "{text}");
    assert!(text.contains("  step 0: s0:a s1:b"), "{text}");
    assert!(text.contains("tail s0:b s1:b"), "{text}");
    assert!(text.contains("127/9"), "{text}");
    assert!(text.contains("10/9"), "{text}");
}

#[test]
fn strategy_file_round_trips_through_eval() {
    let dir = TempDir::new().unwrap();
    let model = investment(&dir);
    let strat = path(&dir, "strategy.json");
    let o = mdpwf(&["optimize", &model, "--exact", "--out", &strat]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mdpwf(&["eval", &model, "--strategy", &strat, "--exact", "--start", "s0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("89/9") && text.contains("38/9") && text.contains("127/9"), "{text}");
}

#[test]
fn json_output_parses() {
    let dir = TempDir::new().unwrap();
    let model = investment(&dir);
    let o = mdpwf(&["optimize", &model, "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).expect("valid JSON");
    assert_eq!(v["kappa"], 2);
    assert_eq!(v["report"].as_array().unwrap().len(), 2);
}

#[test]
fn model_save_is_canonical() {
    let dir = TempDir::new().unwrap();
    let model = investment(&dir);
    let once = std::fs::read_to_string(&model).unwrap();
    let o = mdpwf_stdin(&["gen", "builtin", "investment"], b"");
    assert_eq!(stdout(&o), once);
    assert!(mdpwf(&["validate", &model]).status.success());
}

#[test]
fn sat_pipeline_decides_satisfiable_formula() {
    let dir = TempDir::new().unwrap();
    let cnf = path(&dir, "phi.cnf");
    std::fs::write(&cnf, "c sample\np cnf 3 2\n1 2 3 0\n-1 -2 3 0\n").unwrap();
    let reduced = mdpwf(&["gen", "sat", &cnf]);
    assert!(reduced.status.success(), "{}", stderr(&reduced));
    let o = mdpwf_stdin(&["oracle", "-", "--threshold", "auto"], &reduced.stdout);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("YES\n"), "{text}");
    assert!(text.contains("satisfies true"), "{text}");
}

#[test]
fn sat_pipeline_rejects_unsatisfiable_formula() {
    let dir = TempDir::new().unwrap();
    let cnf = path(&dir, "unsat.cnf");
    std::fs::write(&cnf, "p cnf 1 2\n1 1 1 0\n-1 -1 -1 0\n").unwrap();
    let reduced = mdpwf(&["gen", "sat", &cnf]);
    let o = mdpwf_stdin(&["oracle", "-", "--threshold", "auto"], &reduced.stdout);
    assert_eq!(stdout(&o).trim(), "NO");
}

#[test]
fn usage_errors_exit_two() {
    let o = mdpwf(&["optimize", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error:"));
    assert_eq!(mdpwf(&["bogus"]).status.code(), Some(2));
    assert_eq!(mdpwf(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "{ \"states\": [").unwrap();
    let o = mdpwf(&["optimize", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parse error"));

    let missing = dir.path().join("missing.json");
    assert!(!Path::new(&missing).exists());
    let o = mdpwf(&["validate", &missing.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));

    let cnf = path(&dir, "two.cnf");
    std::fs::write(&cnf, "p cnf 2 1\n1 2 0\n").unwrap();
    let o = mdpwf(&["gen", "sat", &cnf]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DIMACS line 2"));
}

#[test]
fn bench_writes_csv() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "rq1.csv");
    let o = mdpwf(&["bench", "rq1", "--states", "5,10", "--seeds", "0", "--csv", &csv]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("states,actions,principals,ratio,seed,kappa"));
    assert!(lines[1].starts_with("5,") && lines[1].ends_with(",ok"));
}

#[test]
fn sweep_writes_grid() {
    let dir = TempDir::new().unwrap();
    let model = investment(&dir);
    let csv = path(&dir, "sweep.csv");
    let o = mdpwf(&[
        "sweep", &model, "--alpha", "1/2:9/10:1/10", "--beta", "1/10:1/2:1/10", "--csv", &csv,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 1 + 5 * 5);
}
