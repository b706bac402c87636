use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn grf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grf")).current_dir(dir).args(args).output().expect("run grf")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = grf(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json summary on stdout")
}

fn stderr_json(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stderr).lines().map(|l| serde_json::from_str(l).expect("json on stderr")).collect()
}

fn manifest(dir: &Path, output: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{output}.manifest.json"))).unwrap()).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/karate_exact_d2_k3.csv")
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--er", "100", "0.4", "--seed", "7", "-o", "g.edges"]);
    let first = fs::read(dir.path().join("g.edges")).unwrap();
    ok(dir.path(), &["generate", "--er", "100", "0.4", "--seed", "7", "-o", "g.edges"]);
    assert_eq!(first, fs::read(dir.path().join("g.edges")).unwrap());
    let m = manifest(dir.path(), "g.edges");
    assert_eq!(m["command"], "generate");
    assert_eq!(m["config"]["generate"]["seed"], 7);
    assert_eq!(m["summary"]["graph"]["nodes"], 100);
}

#[test]
fn estimate_on_stored_graph_writes_chain_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--er", "62", "0.1", "--seed", "3", "-o", "g62.edges"]);
    let summary = ok(
        dir.path(),
        &["estimate", "--graph", "g62.edges", "--d", "1", "--sigma2", "0.2", "--p-term", "0.1", "--m", "80", "--check", "-o", "k.chain"],
    );
    assert!(summary["frobenius_error"].as_f64().unwrap() < 0.1);
    let text = fs::read_to_string(dir.path().join("k.chain")).unwrap();
    let chain = grf_core::format::read_chain(text.as_bytes()).unwrap();
    assert_eq!(chain.n(), 62);
    let m = manifest(dir.path(), "k.chain");
    assert_eq!(m["config"]["estimate"]["walk"]["m"], 80);
    assert_eq!(m["output"], "k.chain");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for (threads, out) in [("1", "a.chain"), ("4", "b.chain")] {
        ok(dir.path(), &["--threads", threads, "estimate", "--karate", "--d", "3", "--m", "10", "--jlt", "8", "--seed", "5", "-o", out]);
    }
    assert_eq!(fs::read(dir.path().join("a.chain")).unwrap(), fs::read(dir.path().join("b.chain")).unwrap());
}

#[test]
fn bench_frobenius_reaches_target_error() {
    let dir = tempfile::tempdir().unwrap();
    let summary = ok(dir.path(), &["bench-frobenius", "--er", "200", "0.4", "--d", "1", "--p-terms", "0.1", "--seed", "1", "-o", "f.csv"]);
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    let last = cells.iter().find(|c| c["m"] == 80).unwrap();
    assert!(last["mean"].as_f64().unwrap() < 0.04);
    let csv = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "graph,d,p_term,m,mean,std");
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn bench_speed_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["bench-speed", "--ns", "1,30", "-o", "s.csv"]);
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,method,flops");
    assert!(csv.contains("30,brute_force,27900"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn kmeans_with_exact_kernel_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let reference = fixture();
    let summary = ok(
        dir.path(),
        &["kmeans", "--karate", "--d", "2", "--exact", "--restarts", "300", "--reference", reference.to_str().unwrap(), "-o", "l.csv"],
    );
    assert_eq!(summary["clustering_error"], 0.0);
    let labels = fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert!(labels.starts_with("node,cluster\n"));
}

#[test]
fn solve_features_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.txt"), (0..34).map(|i| format!("{i}\n")).collect::<String>()).unwrap();
    let s = ok(dir.path(), &["solve", "--karate", "--rhs", "b.txt", "--trials", "10", "--check", "-o", "x.txt"]);
    assert!(s["relative_error"].as_f64().unwrap() < 0.05);
    assert_eq!(fs::read_to_string(dir.path().join("x.txt")).unwrap().lines().count(), 34);

    ok(dir.path(), &["features", "--karate", "--m", "4", "--sampler", "reinforced:0.5", "-o", "b.features"]);
    let text = fs::read_to_string(dir.path().join("b.features")).unwrap();
    let (header, rows) = grf_core::format::read_feature_matrix(text.as_bytes()).unwrap();
    assert_eq!((header.n, header.m, rows.nrows()), (34, 4, 34));

    let v = ok(dir.path(), &["validate", "--karate", "-o", "v.json"]);
    assert_eq!(v["ok"], true);
    assert_eq!(v["kernels"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("v.json.manifest.json").exists());
}

#[test]
fn anchors_with_jlt_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = grf(dir.path(), &["estimate", "--karate", "--m", "5", "--anchors", "20", "--jlt", "10", "-o", "c.chain"]);
    assert!(out.status.success());
    let lines = stderr_json(&out);
    assert!(lines.iter().any(|l| l["warning"].as_str().unwrap_or("").contains("anchors")));
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str, i32); 5] = [
        (&["frobnicate"], "usage", 2),
        (&["estimate", "--karate", "--er", "5", "0.5", "-o", "x"], "usage", 2),
        (&["estimate", "--graph", "missing.edges", "-o", "x"], "io", 1),
        (&["estimate", "--karate", "--p-term", "1.5", "-o", "x"], "invalid_parameter", 1),
        (&["kmeans", "--karate", "--clusters", "40", "-o", "x"], "invalid_parameter", 1),
    ];
    for (args, kind, code) in cases {
        let out = grf(dir.path(), args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let lines = stderr_json(&out);
        assert_eq!(lines.last().unwrap()["error"], kind, "{args:?}");
    }
    fs::write(dir.path().join("bad.edges"), "0 1\n1 1\n").unwrap();
    let out = grf(dir.path(), &["generate", "--graph", "bad.edges", "-o", "y"]);
    assert_eq!(stderr_json(&out).last().unwrap()["error"], "self_loop");
}
