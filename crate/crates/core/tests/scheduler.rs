use batchdc::bench::{random_tasks, TaskGenSpec};
use batchdc::fixtures::{mesh118, mesh30};
use batchdc::grid::Grid;
use batchdc::solver::{BaseCase, Scheduler, SolveConfig, SplitAction, TopologyTask};
use batchdc::tree::{build_tree, flat_application_count, solve_batch_counted};

fn flat() -> SolveConfig {
    SolveConfig { scheduler: Scheduler::Flat, ..SolveConfig::default() }
}

fn tree() -> SolveConfig {
    SolveConfig { scheduler: Scheduler::Tree, ..SolveConfig::default() }
}

/// Three valid, mutually compatible splits on distinct substations.
fn three_splits(grid: &Grid) -> [SplitAction; 3] {
    let t = random_tasks(grid, &TaskGenSpec { tasks: 1, splits: 3, ti: 1, seed: 5 }).unwrap().remove(0);
    let mut s = t.splits;
    s.sort();
    [s[0].clone(), s[1].clone(), s[2].clone()]
}

fn task(grid: &Grid, splits: &[&SplitAction]) -> TopologyTask {
    TopologyTask { splits: splits.iter().map(|&s| s.clone()).collect(), ..TopologyTask::identity(grid) }
}

fn fig_1a(grid: &Grid) -> Vec<TopologyTask> {
    let [s1, s2, s3] = three_splits(grid);
    vec![task(grid, &[&s1]), task(grid, &[&s2]), task(grid, &[&s1, &s2]), task(grid, &[&s1, &s3]), task(grid, &[&s2, &s3])]
}

#[test]
fn shared_prefixes_save_applications() {
    let grid = mesh30();
    let tasks = fig_1a(&grid);
    let t = build_tree(&tasks, &grid);
    assert_eq!(t.edge_count(), 5);
    assert_eq!(flat_application_count(&tasks, &grid), 8);

    let base = BaseCase::new(grid.clone()).unwrap();
    let (a, ca) = solve_batch_counted(&base, &tasks, &flat()).unwrap();
    let (b, cb) = solve_batch_counted(&base, &tasks, &tree()).unwrap();
    assert_eq!(ca.bsdf_applications, 8);
    assert_eq!(cb.bsdf_applications, 5);
    assert_eq!(a, b);
    assert!(cb.peak_live_ptdfs <= t.depth() + 1);
}

#[test]
fn split_order_within_a_task_does_not_matter() {
    let grid = mesh30();
    let [s1, s2, _] = three_splits(&grid);
    let tasks = vec![task(&grid, &[&s1, &s2]), task(&grid, &[&s2, &s1])];
    assert_eq!(build_tree(&tasks, &grid).edge_count(), 2);
}

#[test]
fn disjoint_single_splits_share_nothing() {
    let grid = mesh30();
    let [s1, s2, s3] = three_splits(&grid);
    let tasks = vec![task(&grid, &[&s1]), task(&grid, &[&s2]), task(&grid, &[&s3])];
    assert_eq!(build_tree(&tasks, &grid).edge_count(), 3);
}

#[test]
fn different_assignments_on_one_substation_are_different_edges() {
    let grid = mesh30();
    let [s1, ..] = three_splits(&grid);
    let mut other = s1.clone();
    for b in other.branch_assignment.iter_mut() {
        *b = !*b;
    }
    let tasks = vec![task(&grid, &[&s1]), task(&grid, &[&other])];
    assert_eq!(build_tree(&tasks, &grid).edge_count(), 2);
}

#[test]
fn chain_of_three() {
    let grid = mesh30();
    let [s1, s2, s3] = three_splits(&grid);
    let tasks = vec![task(&grid, &[&s1, &s2, &s3])];
    let base = BaseCase::new(grid.clone()).unwrap();
    let (_, c) = solve_batch_counted(&base, &tasks, &tree()).unwrap();
    assert_eq!(c.bsdf_applications, 3);
    assert_eq!(c.peak_live_ptdfs, 4);
}

#[test]
fn random_batches_agree_between_schedulers() {
    let grid = mesh118();
    let base = BaseCase::new(grid.clone()).unwrap();
    // Few substations and short chains so prefixes repeat.
    let mut tasks = random_tasks(&grid, &TaskGenSpec { tasks: 100, splits: 2, ti: 3, seed: 8 }).unwrap();
    let more = random_tasks(&grid, &TaskGenSpec { tasks: 30, splits: 1, ti: 3, seed: 8 }).unwrap();
    tasks.extend(more);
    tasks.push(TopologyTask::identity(&grid));
    let (a, ca) = solve_batch_counted(&base, &tasks, &flat()).unwrap();
    let (b, cb) = solve_batch_counted(&base, &tasks, &tree()).unwrap();
    assert_eq!(a, b);
    assert!(cb.bsdf_applications <= ca.bsdf_applications);
    let t = build_tree(&tasks, &grid);
    assert_eq!(cb.bsdf_applications, t.edge_count());
    assert!(cb.peak_live_ptdfs <= t.depth() + 1);

    let par = SolveConfig { parallel_tree: true, workers: Some(3), ..tree() };
    let (c, cc) = solve_batch_counted(&base, &tasks, &par).unwrap();
    assert_eq!(a, c);
    assert_eq!(cc.bsdf_applications, cb.bsdf_applications);
    assert!(cc.peak_live_ptdfs <= t.depth() + 1);
}

#[test]
fn failing_prefix_fails_its_subtree_only() {
    let grid = mesh30();
    let [s1, s2, _] = three_splits(&grid);
    let mut broken = s1.clone();
    broken.branch_assignment.iter_mut().for_each(|b| *b = true);
    let tasks = vec![task(&grid, &[&broken]), task(&grid, &[&broken, &s2]), task(&grid, &[&s2]), task(&grid, &[&s1, &s2])];
    let base = BaseCase::new(grid.clone()).unwrap();
    let (a, _) = solve_batch_counted(&base, &tasks, &flat()).unwrap();
    let (b, _) = solve_batch_counted(&base, &tasks, &tree()).unwrap();
    assert!(!b[0].diagnostics.feasible && !b[1].diagnostics.feasible);
    assert!(b[2].diagnostics.feasible && b[3].diagnostics.feasible);
    assert_eq!(a, b);
}
