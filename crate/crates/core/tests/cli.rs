use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subelliptic"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn solve_writes_report_field_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--frame", "euclidean2", "--res", "17", "--p", "4", "--f", "const:1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&dir.path().join("solve.json"));
    assert!(rep["summary"]["E_p"].as_f64().unwrap() > 0.0, "{rep}");
    assert!(dir.path().join("u.csv").exists());
    let man = read_json(&dir.path().join("manifest.json"));
    assert_eq!(man["command"]["subcommand"], "solve");
}

#[test]
fn deterministic_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--deterministic", "sweep", "--frame", "grushin", "--res", "11", "--p-list", "4,8", "--write-fields"];
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let first = snapshot(dir.path());
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    assert_eq!(first, snapshot(dir.path()));
    assert!(first.iter().any(|(n, _)| n == "manifest.json"));
    assert!(first.iter().any(|(n, _)| n == "u_p8.csv"));
}

#[test]
fn heisenberg_sweep_reports_decreasing_n_p() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", "--frame", "heisenberg1", "--res", "9", "--p-list", "4,8,16"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&dir.path().join("sweep.json"));
    let n_p: Vec<f64> = rep["report"]["N_p"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(n_p.len(), 3);
    assert!(n_p.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)), "{n_p:?}");
    assert_eq!(rep["checks"]["monotonicity"]["passed"], true);
}

#[test]
fn verify_and_frames_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("verify.json").exists());
    assert_eq!(run(dir.path(), &["frames"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["frames", "--frame", "heisenberg1", "--samples", "50"]).status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("frames.json"))["passed"], true);
}

#[test]
fn distance_and_differential_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["distance", "--frame", "euclidean2", "--res", "17", "--source", "point:0.5,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("distance.csv").exists());
    let o = run(
        dir.path(),
        &["differential", "--frame", "euclidean2", "--res", "33", "--u", "expr:sin(x1)+x2*x2", "--at", "0.5,0.5"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("r,worst_ratio,status\n"));
}

#[test]
fn probe_reports_violation_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["probe", "--frame", "euclidean2", "--res", "33", "--u", "expr:2*x1", "--equation", "eikonal", "--at", "0.5,0.5"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,side,admissible_count,worst_violation\n"), "{csv}");
    let o = run(
        dir.path(),
        &["probe", "--frame", "euclidean2", "--res", "33", "--u", "expr:x1", "--equation", "eikonal", "--at", "0.5,0.5"],
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bad_inputs_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 5] = [
        (&["solve", "--frame", "nosuchframe"], "frame"),
        (&["solve", "--res", "17", "--f", "expr:x1+*"], "f"),
        (&["solve", "--res", "17", "--g", "file:/nonexistent/g.csv"], "g"),
        (&["solve", "--res", "17", "--p", "0.5"], "p"),
        (&["sweep", "--res", "9", "--p-list", "8,4"], "p-list"),
    ];
    for (args, key) in cases {
        let o = run(dir.path(), args);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {err}");
        assert!(err.starts_with(&format!("error: {key}: ")), "{args:?}: {err}");
    }
}
