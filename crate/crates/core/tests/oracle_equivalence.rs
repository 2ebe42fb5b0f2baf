mod common;

use batchdc::bench::{random_tasks, TaskGenSpec};
use batchdc::fixtures::{mesh118, mesh30, triangle};
use batchdc::oracle::materialize_all;
use batchdc::solver::{BaseCase, BaseOptions, TopologyTask};
use batchdc::Grid;
use common::max_deviation;

fn check(grid: Grid, seed: u64, tol: f64) {
    let base = BaseCase::new(grid.clone()).unwrap();
    let mut tasks = random_tasks(&grid, &TaskGenSpec { tasks: 10, splits: 3, ti: 8, seed }).unwrap();
    tasks.push(TopologyTask::identity(&grid));
    for (i, t) in tasks.iter().enumerate() {
        let d = max_deviation(&base, t);
        assert!(d <= tol, "task {i}: deviation {d:e}");
    }
}

#[test]
fn triangle_matches_oracle() {
    let g = triangle();
    let base = BaseCase::new(g.clone()).unwrap();
    assert!(max_deviation(&base, &TopologyTask::identity(&g)) < 1e-12);
}

#[test]
fn mesh30_matches_oracle() {
    check(mesh30(), 1, 1e-9);
}

#[test]
fn mesh118_matches_oracle() {
    check(mesh118(), 2, 1e-9);
}

#[test]
fn disconnections_match_oracle() {
    let grid = mesh30();
    let disconnectable: Vec<usize> = (0..grid.branches().len()).collect();
    let base = BaseCase::with_options(grid.clone(), &BaseOptions { disconnectable, ..Default::default() }).unwrap();
    let bridges = grid.bridge_branches();
    let mut tasks = random_tasks(&grid, &TaskGenSpec { tasks: 10, splits: 2, ti: 3, seed: 5 }).unwrap();
    let candidates: Vec<usize> = (0..grid.branches().len()).filter(|&b| !bridges[b]).collect();
    let mut tested = 0;
    for (i, t) in tasks.iter_mut().enumerate() {
        t.disconnections = vec![candidates[(7 * i) % candidates.len()], candidates[(7 * i + 3) % candidates.len()]];
        if materialize_all(&grid, t).is_err() {
            continue;
        }
        let d = max_deviation(&base, t);
        assert!(d <= 1e-9, "task {i}: deviation {d:e}");
        tested += 1;
    }
    assert!(tested >= 5);
}

#[test]
fn case300_matches_oracle() {
    let grid = batchdc::fixtures::case300().unwrap();
    assert_eq!(grid.node_count(), 300);
    assert_eq!(grid.branches().len(), 411);
    check(grid, 3, 1e-6);
}
