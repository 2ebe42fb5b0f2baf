use std::path::Path;
use std::process::{Command, Output};

use batchdc::bench::{random_tasks, TaskGenSpec};
use batchdc::factors::dump::read_dump;
use batchdc::fixtures::{case300_path, mesh30};
use batchdc::grid::native::{load_native, save_native};
use batchdc::solver::{write_tasks, BaseCase, SolveConfig};
use batchdc::solve_batch;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchdc")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn mesh30_files(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let grid = mesh30();
    let g = dir.join("mesh30.json");
    let t = dir.join("tasks.jsonl");
    save_native(&grid, &g).unwrap();
    let tasks = random_tasks(&grid, &TaskGenSpec { tasks: 12, splits: 2, ti: 4, seed: 3 }).unwrap();
    write_tasks(&t, &tasks, &grid).unwrap();
    (g, t)
}

#[test]
fn solve_output_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (g, t) = mesh30_files(dir.path());
    let out = dir.path().join("out.jsonl");
    let o = run(&["solve", p(&g), p(&t), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();

    let grid = load_native(&g).unwrap();
    let tasks = batchdc::solver::read_tasks(&t, &grid).unwrap();
    let base = BaseCase::new(grid).unwrap();
    let expect: String = solve_batch(&base, &tasks, &SolveConfig::default())
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, r)| r.to_json_line(i) + "\n")
        .collect();
    assert_eq!(text, expect);

    let summary: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(summary["tasks"], 12);
    assert!(summary["loadflows_per_second"].as_f64().unwrap() > 0.0);
}

#[test]
fn modes_and_schedulers_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (g, t) = mesh30_files(dir.path());
    let mut outputs = Vec::new();
    for extra in [&[][..], &["--mode", "metric-first"], &["--scheduler", "tree"], &["--workers", "1"], &["--workers", "8"]] {
        let mut args = vec!["solve", p(&g), p(&t)];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success());
        outputs.push(o.stdout);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn validate_passes_and_catches_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let (g, t) = mesh30_files(dir.path());
    let o = run(&["validate", p(&g), p(&t), "--samples", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["max_abs_deviation"].as_f64().unwrap() <= 1e-6);

    let o = run(&["validate", p(&g), p(&t), "--samples", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["max_abs_deviation"].as_f64().unwrap() <= 1e-12);

    let o = run(&["validate", p(&g), p(&t), "--samples", "4", "--inject-fault", "flip-outage-sign"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("contingency"), "{err}");
}

#[test]
fn import_and_ptdf_dump() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("case300.json");
    let o = run(&["import", p(&case300_path()), p(&g)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("300 nodes, 411 branches"), "{err}");
    let grid = load_native(&g).unwrap();
    assert_eq!(grid.substations().len(), 12);

    let bin = dir.path().join("ptdf.bin");
    let o = run(&["ptdf", p(&g), "--out", p(&bin)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (side, values) = read_dump(&bin).unwrap();
    assert_eq!(values.len(), side.rows.len() * side.cols.len());
    assert_eq!(side.cols.len(), 300);
    assert!(values.iter().all(|v| v.abs() <= 1.0 + 1e-9));

    let red = dir.path().join("reduced.bin");
    let o = run(&["ptdf", p(&g), "--out", p(&red), "--reduced"]);
    assert!(o.status.success());
    let (side_r, _) = read_dump(&red).unwrap();
    assert!(side_r.cols.len() < side.cols.len());
    assert_eq!(side_r.cols.last().map(String::as_str), Some("__static__"));
}

#[test]
fn stub_reduce_import() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("reduced.json");
    let o = run(&["import", p(&case300_path()), p(&g), "--stub-reduce"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stub reduction"));
    let reduced = load_native(&g).unwrap();
    assert!(reduced.branches().len() < 411);

    let corrupt = dir.path().join("corrupt.m");
    std::fs::write(&corrupt, "function mpc = broken\nmpc.bus = [1 3 0;\n").unwrap();
    let o = run(&["import", p(&corrupt), p(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_tasks_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let (g, _) = mesh30_files(dir.path());
    let t = dir.path().join("gen.jsonl");
    let o = run(&["gen-tasks", p(&g), "--out", p(&t), "--tasks", "5", "--ti", "2"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&t).unwrap().lines().count(), 5);

    let o = run(&["bench", p(&g), "--tasks", "8", "--ti", "4", "--splits", "2", "--repeats", "2", "--baseline", "oracle", "--oracle-topologies", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["loadflows"].as_u64().unwrap() > 0);
    assert!(r["speedup_vs_oracle"].as_f64().unwrap() > 0.0);
    assert_eq!(r["repeats"], 2);
}

#[test]
fn errors_map_to_exit_codes() {
    let o = run(&["solve", "/nonexistent/grid.json", "/nonexistent/tasks.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/grid.json"));

    let o = run(&["solve"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let (g, t) = mesh30_files(dir.path());
    let o = run(&["solve", p(&g), p(&t), "--mode", "symmetric"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetric"));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"splits\": [{\"substation\": \"nope\", \"branch_assignment\": []}]}\n").unwrap();
    let o = run(&["solve", p(&g), p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}
