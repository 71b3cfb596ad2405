use std::path::Path;
use std::process::{Command, Output};

fn pds(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pds")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_then_solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let gen = pds(&["gen", "--family", "sk-ising", "--d", "12", "--seed", "7", "-o", "a.json"], dir.path());
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let first = pds(&["solve", "a.json", "--seed", "7", "--json"], dir.path());
    let second = pds(&["solve", "a.json", "--seed", "7", "--json"], dir.path());
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let v: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["d"], 12);
    assert!(v.get("wall_time_s").is_none());
    let oracle = pds(&["baseline", "a.json", "--method", "oracle", "--json"], dir.path());
    let o: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
    assert!(v["energy"].as_f64().unwrap() >= o["energy"].as_f64().unwrap() - 1e-9);
}

#[test]
fn gen_is_reproducible_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let a = pds(&["gen", "--family", "nae-3sat", "--d", "30", "--seed", "2"], dir.path());
    let b = pds(&["gen", "--family", "nae-3sat", "--d", "30", "--seed", "2"], dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("\"ising-v1\""));
}

#[test]
fn bench_writes_fixed_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = pds(&["bench", "--preset", "table1-uniform", "--instances", "20", "--seed", "1", "--d", "100"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows = pds_core::io::read_results(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!(text.lines().next().unwrap(), pds_core::io::RESULT_HEADER.join(","));
    let again = pds(&["bench", "--preset", "table1-uniform", "--instances", "20", "--seed", "1", "--d", "100"], dir.path());
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn bench_with_timing_fills_time_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = pds(&["bench", "--preset", "sk-ising", "--instances", "2", "--d", "40", "--timing", "-o", "r.csv"], dir.path());
    assert!(out.status.success());
    let rows = pds_core::io::read_results(std::fs::File::open(dir.path().join("r.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.wall_time_s.is_some() && r.speed.is_some()));
}

#[test]
fn solve_appends_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.txt"), "3 2 one-indexed\n1 2 1\n2 3 -1\nF 1 0.5\n").unwrap();
    for _ in 0..2 {
        let o = pds(&["solve", "e.txt", "--csv", "out.csv"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let rows = pds_core::io::read_results(std::fs::File::open(dir.path().join("out.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].instance_id, "e");
    assert_eq!(rows[0].energy, -4.5);
}

#[test]
fn estimate_eta_prints_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = pds(&["estimate-eta", "--k", "6", "--alpha", "1", "--beta", "6"], dir.path());
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.5).abs() <= 1e-4);
}

#[test]
fn baselines_run() {
    let dir = tempfile::tempdir().unwrap();
    pds(&["gen", "--family", "maxcut-3", "--d", "20", "--seed", "3", "-o", "m.json"], dir.path());
    for method in ["oracle", "sd", "sa"] {
        let o = pds(&["baseline", "m.json", "--method", method, "--seed", "4", "--json"], dir.path());
        assert!(o.status.success(), "{method}");
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["method"], method);
    }
}

#[test]
fn usage_errors_exit_2_runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pds(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(pds(&["solve"], dir.path()).status.code(), Some(2));
    assert_eq!(pds(&["gen", "--family", "sk-ising", "--d", "x"], dir.path()).status.code(), Some(2));
    let missing = pds(&["solve", "missing.json"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());
    std::fs::write(dir.path().join("bad.txt"), "2 1\n0 5 1.0\n").unwrap();
    let bad = pds(&["solve", "bad.txt"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));
    assert_eq!(pds(&["gen", "--family", "nope", "--d", "3"], dir.path()).status.code(), Some(1));
    assert_eq!(pds(&["solve", "bad.txt", "--restarts", "0"], dir.path()).status.code(), Some(1));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pds"))
        .args(["estimate-eta", "--k", "3", "--alpha", "1", "--beta", "1"])
        .env("PDS_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_pds"))
        .args(["estimate-eta", "--k", "3", "--alpha", "1", "--beta", "1"])
        .env("PDS_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
