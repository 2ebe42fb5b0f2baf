use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use batchdc::bench::{count_loadflows, random_tasks, run_bench, ti_sweep, BenchConfig, TaskGenSpec, COUNTING};
use batchdc::factors::dump::write_dump;
use batchdc::factors::{compute_ptdf, retained_rows};
use batchdc::grid::matpower::{import_matpower_with, ContingencyPolicy, ImportOptions};
use batchdc::grid::native::{load_native, save_native};
use batchdc::grid::replace_stub_branches;
use batchdc::solver::{
    read_tasks, write_tasks, BaseCase, BaseOptions, IslandingPolicy, Mode, MultiOutageMethod, Scheduler, SolveConfig,
};
use batchdc::tree::solve_batch_counted;
use batchdc::validate::{validate_sample, Fault};
use batchdc::{Error, Grid};

#[derive(Parser)]
#[command(name = "batchdc", version, about = "Batch DC loadflow with low-rank PTDF updates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a MATPOWER case to the native JSON format.
    Import(ImportArgs),
    /// Dump the base PTDF (binary + JSON sidecar).
    Ptdf(PtdfArgs),
    /// Solve a task file.
    Solve(SolveArgs),
    /// Compare sampled tasks against the reference oracle.
    Validate(ValidateArgs),
    /// Throughput benchmark on random tasks.
    Bench(BenchArgs),
    /// Write random split tasks as JSON Lines.
    GenTasks(GenTasksArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ContingencyArg {
    None,
    All,
    NonBridge,
}

#[derive(Args)]
struct MatpowerArgs {
    /// Switchable substations to designate (highest degree first).
    #[arg(long, default_value_t = 12)]
    switchable: usize,
    #[arg(long, value_enum, default_value = "non-bridge")]
    contingencies: ContingencyArg,
    /// Skip generator outage contingencies.
    #[arg(long)]
    no_gen_outages: bool,
}

impl MatpowerArgs {
    fn options(&self) -> ImportOptions {
        ImportOptions {
            switchable: self.switchable,
            contingencies: match self.contingencies {
                ContingencyArg::None => ContingencyPolicy::None,
                ContingencyArg::All => ContingencyPolicy::AllBranches,
                ContingencyArg::NonBridge => ContingencyPolicy::NonBridge,
            },
            gen_outages: !self.no_gen_outages,
        }
    }
}

#[derive(Args)]
struct ImportArgs {
    input: PathBuf,
    output: PathBuf,
    /// Replace stub branches off switchable substations by injections.
    #[arg(long)]
    stub_reduce: bool,
    #[command(flatten)]
    mp: MatpowerArgs,
}

#[derive(Args)]
struct GridArg {
    /// Native JSON grid, or a MATPOWER `.m` case imported on the fly.
    grid: PathBuf,
    #[command(flatten)]
    mp: MatpowerArgs,
}

impl GridArg {
    fn load(&self) -> batchdc::Result<Grid> {
        if self.grid.extension().is_some_and(|e| e == "m") {
            let imp = import_matpower_with(&self.grid, &self.mp.options())?;
            for n in &imp.notes {
                eprintln!("note: {n}");
            }
            Ok(imp.grid)
        } else {
            load_native(&self.grid)
        }
    }
}

#[derive(Args)]
struct PtdfArgs {
    #[command(flatten)]
    grid: GridArg,
    /// Output file; the sidecar goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    /// Fold static nodes into one column, as the solver does.
    #[arg(long)]
    reduced: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    OutputFirst,
    MetricFirst,
    Symmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerArg {
    Flat,
    Tree,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Error,
    Penalize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MultiArg {
    Modf,
    SequentialLodf,
}

#[derive(Args)]
struct SolveOpts {
    #[arg(long, value_enum, default_value = "output-first")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "flat")]
    scheduler: SchedulerArg,
    #[arg(long, default_value_t = 3)]
    topk_per_case: usize,
    #[arg(long, default_value_t = 10)]
    topk_global: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "penalize")]
    islanding_policy: PolicyArg,
    #[arg(long, default_value_t = 10.0)]
    penalty: f64,
    #[arg(long, value_enum, default_value = "modf")]
    multi_outage: MultiArg,
    /// Tree scheduler: run the root's subtrees in parallel.
    #[arg(long)]
    parallel_tree: bool,
}

impl SolveOpts {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            mode: match self.mode {
                ModeArg::OutputFirst => Mode::OutputFirst,
                ModeArg::MetricFirst => Mode::MetricFirst,
                ModeArg::Symmetric => Mode::Symmetric,
            },
            scheduler: match self.scheduler {
                SchedulerArg::Flat => Scheduler::Flat,
                SchedulerArg::Tree => Scheduler::Tree,
            },
            topk_per_case: self.topk_per_case,
            topk_global: self.topk_global,
            workers: self.workers,
            islanding_policy: match self.islanding_policy {
                PolicyArg::Error => IslandingPolicy::Error,
                PolicyArg::Penalize => IslandingPolicy::Penalize,
            },
            penalty: self.penalty,
            multi_outage_method: match self.multi_outage {
                MultiArg::Modf => MultiOutageMethod::Modf,
                MultiArg::SequentialLodf => MultiOutageMethod::SequentialLodf,
            },
            parallel_tree: self.parallel_tree,
            ..SolveConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    grid: GridArg,
    tasks: PathBuf,
    /// JSON Lines results; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: SolveOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipOutageSign,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    grid: GridArg,
    tasks: PathBuf,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Oracle,
    None,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    grid: GridArg,
    #[arg(long, default_value_t = 100)]
    tasks: usize,
    /// Injection assignments per task (|T_i|).
    #[arg(long, default_value_t = 100)]
    ti: usize,
    #[arg(long, default_value_t = 3)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep repeating the timed solve for this many seconds.
    #[arg(long, default_value_t = 0.0)]
    duration: f64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, value_enum, default_value = "none")]
    baseline: BaselineArg,
    /// Topologies timed on the oracle baseline.
    #[arg(long, default_value_t = 2)]
    oracle_topologies: usize,
    /// Also time these |T_i| values on one fixed set of topologies.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: SolveOpts,
}

#[derive(Args)]
struct GenTasksArgs {
    #[command(flatten)]
    grid: GridArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    tasks: usize,
    #[arg(long, default_value_t = 4)]
    ti: usize,
    #[arg(long, default_value_t = 2)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure modes mapped onto exit codes.
enum Fail {
    /// Usage, I/O or input errors: exit 2.
    Usage(String),
    /// Validation tolerance breach: exit 1.
    Check(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Import(a) => import(a),
        Cmd::Ptdf(a) => ptdf(a),
        Cmd::Solve(a) => solve(a),
        Cmd::Validate(a) => validate(a),
        Cmd::Bench(a) => bench(a),
        Cmd::GenTasks(a) => gen_tasks(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Check(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Fail::Usage(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn import(a: ImportArgs) -> Result<(), Fail> {
    let imp = import_matpower_with(&a.input, &a.mp.options())?;
    for n in &imp.notes {
        eprintln!("note: {n}");
    }
    let mut grid = imp.grid;
    if a.stub_reduce {
        let r = replace_stub_branches(&grid)?;
        eprintln!(
            "stub reduction: removed {} branches and {} nodes, re-homed {} injections, dropped {} contingencies",
            r.removed_branches.len(),
            r.removed_nodes.len(),
            r.rehomed_injections.len(),
            r.dropped_contingencies.len()
        );
        grid = r.grid;
    }
    save_native(&grid, &a.output)?;
    eprintln!(
        "wrote {}: {} nodes, {} branches, {} contingencies, {} switchable substations",
        a.output.display(),
        grid.node_count(),
        grid.branches().len(),
        grid.contingencies().len(),
        grid.substations().len()
    );
    Ok(())
}

fn ptdf(a: PtdfArgs) -> Result<(), Fail> {
    let grid = a.grid.load()?;
    let matrix = if a.reduced {
        BaseCase::new(grid.clone())?.ptdf().clone()
    } else {
        compute_ptdf(&grid, &retained_rows(&grid, &[]))?
    };
    let side = write_dump(&matrix, grid.node_ids(), &a.out)?;
    eprintln!("wrote {} x {} PTDF to {}", side.rows.len(), side.cols.len(), a.out.display());
    Ok(())
}

/// Base case whose disconnectable set covers every branch the tasks open.
fn base_for(grid: Grid, tasks: &[batchdc::TopologyTask]) -> Result<BaseCase, Fail> {
    let mut disconnectable: Vec<usize> = tasks.iter().flat_map(|t| t.disconnections.iter().copied()).collect();
    disconnectable.sort_unstable();
    disconnectable.dedup();
    Ok(BaseCase::with_options(grid, &BaseOptions { disconnectable, ..Default::default() })?)
}

fn solve(a: SolveArgs) -> Result<(), Fail> {
    let grid = a.grid.load()?;
    let tasks = read_tasks(&a.tasks, &grid)?;
    if tasks.is_empty() {
        return Err(Fail::Usage("task file is empty".into()));
    }
    let base = base_for(grid, &tasks)?;
    let cfg = a.opts.config();
    let t0 = Instant::now();
    let (results, counters) = solve_batch_counted(&base, &tasks, &cfg)?;
    let wall = t0.elapsed().as_secs_f64();

    let mut text = String::new();
    for (i, r) in results.iter().enumerate() {
        text.push_str(&r.to_json_line(i));
        text.push('\n');
    }
    match &a.out {
        Some(p) => std::fs::write(p, &text).map_err(|e| Fail::Usage(format!("{}: {e}", p.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Fail::Usage(e.to_string()))?;
        }
    }
    let loadflows = count_loadflows(base.grid(), &tasks, &results);
    let summary = serde_json::json!({
        "tasks": tasks.len(),
        "infeasible_tasks": results.iter().filter(|r| !r.diagnostics.feasible).count(),
        "loadflows": loadflows,
        "counting": COUNTING,
        "wall_time_s": wall,
        "loadflows_per_second": loadflows as f64 / wall,
        "bsdf_applications": counters.bsdf_applications,
        "peak_live_ptdfs": counters.peak_live_ptdfs,
    });
    eprintln!("{summary}");
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<(), Fail> {
    let grid = a.grid.load()?;
    let tasks = read_tasks(&a.tasks, &grid)?;
    let base = base_for(grid, &tasks)?;
    let fault = a.inject_fault.map(|f| match f {
        FaultArg::FlipOutageSign => Fault::FlipOutageSign,
    });
    let report = validate_sample(&base, &tasks, a.samples, a.seed, a.tol, fault)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(a.out.as_deref(), &text)?;
    if report.passed {
        Ok(())
    } else if let Some(w) = &report.worst {
        Err(Fail::Check(format!(
            "max deviation {:e} > {:e} at task {}, contingency {}, branch {}",
            report.max_abs_deviation,
            a.tol,
            w.task.map_or("identity".into(), |t| t.to_string()),
            w.contingency.as_deref().unwrap_or("N-0"),
            w.branch
        )))
    } else {
        Err(Fail::Check(report.feasibility_mismatches.join("; ")))
    }
}

fn bench(a: BenchArgs) -> Result<(), Fail> {
    let grid = a.grid.load()?;
    let base = BaseCase::new(grid)?;
    if a.tasks == 0 || a.ti == 0 {
        return Err(Fail::Usage("--tasks and --ti must be at least 1".into()));
    }
    if !(a.duration >= 0.0 && a.duration.is_finite()) {
        return Err(Fail::Usage("--duration must be a non-negative number of seconds".into()));
    }
    let cfg = BenchConfig {
        gen: TaskGenSpec { tasks: a.tasks, splits: a.splits, ti: a.ti, seed: a.seed },
        solve: a.opts.config(),
        min_duration: Duration::from_secs_f64(a.duration),
        min_repeats: a.repeats,
        oracle_topologies: match a.baseline {
            BaselineArg::Oracle => a.oracle_topologies,
            BaselineArg::None => 0,
        },
    };
    let mut report = run_bench(&base, &cfg)?;
    if !a.sweep.is_empty() {
        report.sweep = Some(ti_sweep(&base, &cfg.gen, &a.sweep, &cfg.solve, cfg.min_repeats)?);
    }
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report).expect("report serializes"))
}

fn gen_tasks(a: GenTasksArgs) -> Result<(), Fail> {
    let grid = a.grid.load()?;
    let tasks = random_tasks(&grid, &TaskGenSpec { tasks: a.tasks, splits: a.splits, ti: a.ti, seed: a.seed })?;
    write_tasks(&a.out, &tasks, &grid)?;
    eprintln!("wrote {} tasks to {}", tasks.len(), a.out.display());
    Ok(())
}
