//! End-to-end tests of the command-line program: exit codes, reports,
//! configuration files and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wildflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wildflow"))
        .args(args)
        .env("WILDFLOW_THREADS", "1")
        .output()
        .expect("the binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn geometry_dump_passes_with_a_stamped_envelope() {
    let o = wildflow(&["--json", "geometry", "dump"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["command"], "geometry dump");
    assert_eq!(v["pass"], true);
    assert_eq!(v["geometry"]["directions"].as_array().unwrap().len(), 6);
    assert!(v["geometry"]["positivity_radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn text_and_kv_formats() {
    let o = wildflow(&["ledger", "search", "--m", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("resolved configuration:"));
    assert!(text.trim_end().ends_with("verdict: PASS"));
    let o = wildflow(&["--format", "kv", "ledger", "search", "--m", "1"]);
    assert!(stdout(&o).lines().any(|l| l == "pass=true"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&wildflow(&["geometry", "dump", "--nope"])), 2);
    assert_eq!(code(&wildflow(&["stage"])), 2);
    assert_eq!(code(&wildflow(&["jets", "verify", "--n", "abc"])), 2);
    // A ledger check without its required values.
    assert_eq!(code(&wildflow(&["ledger", "check", "--m", "1"])), 2);
}

#[test]
fn violated_ledger_names_its_constraint() {
    let o = wildflow(&[
        "--json", "ledger", "check", "--m", "1", "--a", "k:2^10000", "--b", "8000", "--beta", "1/1000000000", "--L", "20",
        "--cr", "0.001",
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["pass"], false);
    assert!(v.to_string().contains("base_lower"), "{v}");
}

#[test]
fn underresolved_stage_is_refused_then_fails_honestly() {
    let o = wildflow(&["stage", "run", "--mode", "additive", "--toy", "--n", "16"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--allow-underresolved"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stage");
    let o = wildflow(&[
        "--json", "--out", path(&out), "stage", "run", "--mode", "additive", "--toy", "--n", "16",
        "--allow-underresolved",
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["pass"], false);
    assert!(v.to_string().contains("corrector potential"));
    for f in ["report.json", "report.txt", "config.cfg", "pair.cfg"] {
        assert!(out.join(f).exists(), "{f}");
    }

    // The stored pair is read back and its residual recomputed exactly.
    let o = wildflow(&["--json", "stage", "residual", "--in", path(&out)]);
    let r = json(&o);
    assert_eq!(r["result"], v["result"]["residual_after"]);
    let expected = if r["pass"] == true { 0 } else { 1 };
    assert_eq!(code(&o), expected, "{}", stderr(&o));
}

#[test]
fn saved_configuration_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = wildflow(&[
        "--out", path(&a), "noise", "simulate", "--mode", "multiplicative", "--seed", "5", "--samples", "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = a.join("config.cfg");
    let o = wildflow(&["--config", path(&cfg), "--out", path(&b), "noise", "simulate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(&cfg).unwrap(), fs::read(b.join("config.cfg")).unwrap());
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[jets]\nn = 16\nbogus = 1\n").unwrap();
    let o = wildflow(&["--config", path(&cfg), "jets", "verify"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn io_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.cfg");
    let o = wildflow(&["--config", path(&missing), "geometry", "dump"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("missing.cfg"), "{}", stderr(&o));
    let o = wildflow(&["stage", "residual", "--in", path(&dir.path().join("nothing"))]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn report_aggregates_runs_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_eq!(code(&wildflow(&["--out", path(&root.join("geo")), "geometry", "dump"])), 0);
    assert_eq!(code(&wildflow(&["--out", path(&root.join("ledger")), "ledger", "search", "--m", "7/10"])), 0);
    let first = wildflow(&["--json", "--out", path(root), "report", "--dir", path(root)]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let second = wildflow(&["--json", "--out", path(root), "report", "--dir", path(root)]);
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["result"]["runs"].as_array().map(Vec::len), Some(2), "{v}");

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&wildflow(&["report", "--dir", path(empty.path())])), 2);
}
