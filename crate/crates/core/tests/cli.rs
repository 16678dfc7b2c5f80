use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sonc_core::report::read_csv;

const MOTZKIN: &str = "x0^4*x1^2 + x0^2*x1^4 - 3*x0^2*x1^2 + 1";
const QUARTIC: &str = "x0^4 + x0^3 - x0 + 1";
const THREE_VAR: &str = "2.723 + 3.932*x2^8 + 6.054*x1^2 + 1.963*x1^4*x2^2 - 1.204*x0*x1*x2^3 \
    + 1.462*x0*x1^2*x2 + 1.766*x0*x1^2*x2^2 + 0.841*x0*x1^2*x2^4 - 0.329*x0^2*x1*x2^2 \
    + 7.57*x0^2*x1^2*x2^4 + 2.428*x0^4*x2^2";

fn sonc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sonc")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json_line(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "one JSON line expected: {text}");
    let v: Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["schema_version"], 1);
    v
}

#[test]
fn bound_motzkin_with_sonc() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "motzkin.txt", MOTZKIN);
    let v = json_line(&sonc(&["bound", &f, "--method", "sonc", "--json"]));
    assert!(v["lower_bound"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(v["status"], "optimal");
}

#[test]
fn bound_bnb_closes_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "quartic.txt", QUARTIC);
    let v = json_line(&sonc(&["bound", &f, "--method", "bnb", "--eps", "1e-3", "--json"]));
    assert!((v["lower_bound"].as_f64().unwrap() - 0.682).abs() < 1e-3);
    assert!(v["gap"].as_f64().unwrap() <= 1e-3);
    for strategy in ["worst", "dfs"] {
        let w = json_line(&sonc(&["bound", &f, "--method", "bnb", "--strategy", strategy, "--sparse", "--json"]));
        assert!((w["lower_bound"].as_f64().unwrap() - 0.682).abs() < 1e-3);
    }
}

#[test]
fn fork_lists_minimal_orthants() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "three_var.txt", THREE_VAR);
    let v = json_line(&sonc(&["bound", &f, "--method", "fork", "--list-orthants", "--json"]));
    let listed: Vec<&str> = v["orthants"].as_array().unwrap().iter().map(|o| o["orthant"].as_str().unwrap()).collect();
    assert_eq!(listed, ["(-,+,+)", "(-,+,-)", "(-,-,+)"]);
    let o = json_line(&sonc(&["orthants", &f, "--json"]));
    assert_eq!(o["count"], 3);
}

#[test]
fn json_input_and_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let p: sonc_core::Polynomial = MOTZKIN.parse().unwrap();
    let f = write(dir.path(), "motzkin.json", &p.to_json());
    let v = json_line(&sonc(&["bound", &f, "--method", "sage", "--json"]));
    assert!(v["lower_bound"].as_f64().unwrap().abs() < 1e-6);

    let mut child = Command::new(env!("CARGO_BIN_EXE_sonc"))
        .args(["min", "-", "--json"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(QUARTIC.as_bytes()).unwrap();
    let m = json_line(&child.wait_with_output().unwrap());
    assert!((m["value"].as_f64().unwrap() - 0.682).abs() < 1e-3);
}

#[test]
fn unbounded_input_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "cubic.txt", "x0^3 + 1");
    let v = json_line(&sonc(&["bound", &f, "--method", "sonc", "--json"]));
    assert_eq!(v["lower_bound"], "-inf");
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "x0^^2 + 1");
    assert_eq!(sonc(&["bound", &bad]).status.code(), Some(2));
    assert_eq!(sonc(&["bound", "/nonexistent/file.txt"]).status.code(), Some(2));
    assert_eq!(sonc(&["bound", &bad, "--method", "nope"]).status.code(), Some(2));
    assert_eq!(sonc(&["gen", "--n", "2", "--d", "4", "--t", "2"]).status.code(), Some(2));
    let f = write(dir.path(), "quartic.txt", QUARTIC);
    assert_eq!(sonc(&["min", &f, "--cone", "+,-"]).status.code(), Some(2));
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for path in [&a, &b] {
        let out = sonc(&["gen", "--n", "2", "--d", "4", "--t", "6", "--seed", "1", "-o", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let p: sonc_core::Polynomial = fs::read_to_string(&a).unwrap().trim().parse().unwrap();
    assert_eq!(p.num_terms(), 6);
}

#[test]
fn bench_grid_writes_forty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = sonc(&[
        "bench", "--grid-n", "2,3", "--grid-t", "6,9", "--seeds", "5", "--methods", "sonc,bnb", "--workers", "2", "--json", "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 40);
    for r in rows.iter().filter(|r| r.status == sonc_core::report::RunStatus::Optimal) {
        assert!(r.lower_bound <= r.best_value + 1e-6);
    }
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["gaps"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_reads_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    fs::create_dir(&inst).unwrap();
    write(&inst, "squares.txt", "x0^2 + x1^4 + 3");
    write(&inst, "motzkin.txt", MOTZKIN);
    let out = sonc(&["bench", "--dir", inst.to_str().unwrap(), "--methods", "sonc,sage,fork,bnb"]);
    assert!(out.status.success());
    let rows = read_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().filter(|r| r.instance == "squares").all(|r| r.gap <= 1e-6));
}
