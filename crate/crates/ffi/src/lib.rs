//! C ABI over the batchdc engine.
//!
//! A session owns a grid, its reduced base PTDF and a solve configuration.
//! Sessions are immutable after opening and may be shared between threads;
//! concurrent `batchdc_solve_batch` calls on one session are independent.
//!
//! Every function returns a [`BatchdcStatus`]. On failure the message is
//! available from [`batchdc_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use batchdc::grid::native::{from_json_str, load_native};
use batchdc::solver::{BaseCase, BaseOptions, SolveConfig, TopologyTask};
use batchdc::tree::solve_batch_counted;
use batchdc::{Error, Grid};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchdcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidGrid = 4,
    InvalidConfig = 5,
    ShapeMismatch = 6,
    InvalidTask = 7,
    Solver = 8,
    Panic = 9,
}

/// Opaque session handle.
pub struct BatchdcSession {
    base: BaseCase,
    config: SolveConfig,
}

/// Dimensions of a session's buffer layout.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchdcSessionInfo {
    pub nodes: usize,
    pub branches: usize,
    pub contingencies: usize,
    pub substations: usize,
    pub monitored: usize,
    /// Bits per task in the dense branch assignment buffer.
    pub branch_slots: usize,
    /// Bits per injection assignment.
    pub injection_slots: usize,
}

/// Input buffers of one batch. All arrays are contiguous and row-major.
///
/// - `branch_bits`: `tasks * branch_slots` bytes, nonzero = busbar B.
/// - `disconnection_offsets`: `tasks + 1` ascending offsets into
///   `disconnections` (branch indices). Both may be null when no task
///   disconnects anything.
/// - `injection_offsets`: `tasks + 1` ascending offsets counting injection
///   assignments; `injection_bits` holds `injection_offsets[tasks] *
///   injection_slots` bytes. A task with zero assignments gets one all-A
///   assignment.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BatchdcBatch {
    pub tasks: usize,
    pub branch_bits: *const u8,
    pub disconnection_offsets: *const usize,
    pub disconnections: *const usize,
    pub injection_offsets: *const usize,
    pub injection_bits: *const u8,
}

/// Output buffers, each of length `tasks`. `reports_json` receives a
/// newline-separated JSON Lines string identical to `batchdc solve` output,
/// to be released with [`batchdc_string_free`]; pass null to skip it.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BatchdcOutput {
    /// Best metric per task; NaN for infeasible tasks.
    pub metrics: *mut f64,
    /// Index of the best injection assignment, -1 for infeasible tasks.
    pub best_injection: *mut i64,
    /// 1 when the task is feasible.
    pub feasible: *mut u8,
    pub reports_json: *mut *mut c_char,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BatchdcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => BatchdcStatus::Io,
            Error::Parse(_) | Error::Validation(_) | Error::UnsupportedFeature(_) => BatchdcStatus::InvalidGrid,
            Error::InvalidConfig(_) => BatchdcStatus::InvalidConfig,
            Error::InvalidTask(_) => BatchdcStatus::InvalidTask,
            _ => BatchdcStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: BatchdcStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BatchdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BatchdcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            BatchdcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(BatchdcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BatchdcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Splits the config JSON into solver settings and the disconnectable
/// branch ids.
fn parse_config(grid: &Grid, text: Option<&str>) -> Result<(SolveConfig, Vec<usize>), Failure> {
    let Some(text) = text.filter(|t| !t.trim().is_empty()) else {
        return Ok((SolveConfig::default(), Vec::new()));
    };
    let bad = |m: String| fail(BatchdcStatus::InvalidConfig, m);
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let obj = value.as_object_mut().ok_or_else(|| bad("config must be a JSON object".into()))?;
    let mut disconnectable = Vec::new();
    if let Some(d) = obj.remove("disconnectable") {
        let ids: Vec<String> = serde_json::from_value(d).map_err(|e| bad(format!("disconnectable: {e}")))?;
        for id in ids {
            let b = grid
                .branch_index(&id)
                .ok_or_else(|| bad(format!("disconnectable: unknown branch {id}")))?;
            disconnectable.push(b);
        }
        disconnectable.sort_unstable();
        disconnectable.dedup();
    }
    let cfg: SolveConfig = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    cfg.validate()?;
    Ok((cfg, disconnectable))
}

fn open(grid: Grid, config: Option<&str>) -> Result<Box<BatchdcSession>, Failure> {
    let (config, disconnectable) = parse_config(&grid, config)?;
    let base = BaseCase::with_options(grid, &BaseOptions { disconnectable, ..Default::default() })?;
    Ok(Box::new(BatchdcSession { base, config }))
}

/// Opens a session from a native JSON grid file.
///
/// `config_json` may be null for defaults. It accepts the solver settings
/// (`mode`, `topk_per_case`, `topk_global`, `islanding_policy`, `penalty`,
/// `max_batch`, `multi_outage_method`, `scheduler`, `parallel_tree`,
/// `workers`) plus `disconnectable`, the branch ids tasks may open.
///
/// # Safety
/// `path` and `config_json` must be null or valid nul-terminated strings;
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn batchdc_session_open(
    path: *const c_char,
    config_json: *const c_char,
    out: *mut *mut BatchdcSession,
) -> BatchdcStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(BatchdcStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let config = if config_json.is_null() { None } else { Some(str_arg(config_json, "config_json")?) };
        let grid = load_native(Path::new(path))?;
        *out = Box::into_raw(open(grid, config)?);
        Ok(())
    })
}

/// Opens a session from an in-memory native JSON grid description.
///
/// # Safety
/// Same contract as [`batchdc_session_open`].
#[no_mangle]
pub unsafe extern "C" fn batchdc_session_open_json(
    grid_json: *const c_char,
    config_json: *const c_char,
    out: *mut *mut BatchdcSession,
) -> BatchdcStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(BatchdcStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let text = str_arg(grid_json, "grid_json")?;
        let config = if config_json.is_null() { None } else { Some(str_arg(config_json, "config_json")?) };
        let grid = from_json_str(text)?;
        *out = Box::into_raw(open(grid, config)?);
        Ok(())
    })
}

/// # Safety
/// `session` must come from a successful open and not be freed; `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn batchdc_session_info(
    session: *const BatchdcSession,
    out: *mut BatchdcSessionInfo,
) -> BatchdcStatus {
    guard(|| {
        if session.is_null() || out.is_null() {
            return Err(fail(BatchdcStatus::NullPointer, "session or out is null"));
        }
        let base = &(*session).base;
        let g = base.grid();
        *out = BatchdcSessionInfo {
            nodes: g.node_count(),
            branches: g.branches().len(),
            contingencies: g.contingencies().len(),
            substations: g.substations().len(),
            monitored: g.monitored().len(),
            branch_slots: base.branch_slot_count(),
            injection_slots: base.injection_slot_count(),
        };
        Ok(())
    })
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(BatchdcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn check_offsets(off: &[usize], what: &str) -> Result<(), Failure> {
    if off.first() != Some(&0) || off.windows(2).any(|w| w[0] > w[1]) {
        return Err(fail(BatchdcStatus::ShapeMismatch, format!("{what} must start at 0 and be non-decreasing")));
    }
    Ok(())
}

/// Decodes the batch buffers into tasks. All shape checks happen here,
/// before any computation.
unsafe fn decode(base: &BaseCase, b: &BatchdcBatch) -> Result<Vec<TopologyTask>, Failure> {
    let n = b.tasks;
    let bs = base.branch_slot_count();
    let is = base.injection_slot_count();
    let grid = base.grid();
    let bits = slice(b.branch_bits, n * bs, "branch_bits")?;

    let disc_off: Vec<usize> = if b.disconnection_offsets.is_null() {
        vec![0; n + 1]
    } else {
        slice(b.disconnection_offsets, n + 1, "disconnection_offsets")?.to_vec()
    };
    check_offsets(&disc_off, "disconnection_offsets")?;
    let disc = slice(b.disconnections, disc_off[n], "disconnections")?;
    if let Some(&bad) = disc.iter().find(|&&d| d >= grid.branches().len()) {
        return Err(fail(BatchdcStatus::ShapeMismatch, format!("disconnection index {bad} out of range")));
    }

    let inj_off = slice(b.injection_offsets, n + 1, "injection_offsets")?;
    check_offsets(inj_off, "injection_offsets")?;
    let inj = slice(b.injection_bits, inj_off[n] * is, "injection_bits")?;

    let mut tasks = Vec::with_capacity(n);
    for t in 0..n {
        let tb: Vec<bool> = bits[t * bs..(t + 1) * bs].iter().map(|&x| x != 0).collect();
        let sets: Vec<Vec<bool>> = if inj_off[t] == inj_off[t + 1] {
            vec![vec![false; is]]
        } else {
            (inj_off[t]..inj_off[t + 1])
                .map(|k| inj[k * is..(k + 1) * is].iter().map(|&x| x != 0).collect())
                .collect()
        };
        let d = disc[disc_off[t]..disc_off[t + 1]].to_vec();
        tasks.push(TopologyTask::from_dense(grid, &tb, d, sets)?);
    }
    Ok(tasks)
}

/// Solves one batch. Per-task failures are reported inline (NaN metric,
/// -1 best injection, feasible 0, diagnostics in the JSON report); only
/// malformed input or configuration errors fail the call.
///
/// # Safety
/// `session` must be a live session; the buffers described by `batch`
/// must be valid for reads of the documented lengths, and the non-null
/// buffers of `out` valid for writes of `batch.tasks` elements.
#[no_mangle]
pub unsafe extern "C" fn batchdc_solve_batch(
    session: *const BatchdcSession,
    batch: *const BatchdcBatch,
    out: *const BatchdcOutput,
) -> BatchdcStatus {
    guard(|| {
        if session.is_null() || batch.is_null() || out.is_null() {
            return Err(fail(BatchdcStatus::NullPointer, "session, batch or out is null"));
        }
        let s = &*session;
        let b = &*batch;
        let o = &*out;
        let tasks = decode(&s.base, b)?;
        let (results, _) = solve_batch_counted(&s.base, &tasks, &s.config)?;
        for (i, r) in results.iter().enumerate() {
            if !o.metrics.is_null() {
                *o.metrics.add(i) = if r.diagnostics.feasible { r.metric } else { f64::NAN };
            }
            if !o.best_injection.is_null() {
                *o.best_injection.add(i) = r.best_injection.map_or(-1, |k| k as i64);
            }
            if !o.feasible.is_null() {
                *o.feasible.add(i) = r.diagnostics.feasible as u8;
            }
        }
        if !o.reports_json.is_null() {
            let mut text = String::new();
            for (i, r) in results.iter().enumerate() {
                text.push_str(&r.to_json_line(i));
                text.push('\n');
            }
            *o.reports_json = CString::new(text).expect("JSON has no nul").into_raw();
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn batchdc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `session` must be null or come from a successful open, and be freed once.
#[no_mangle]
pub unsafe extern "C" fn batchdc_session_free(session: *mut BatchdcSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn batchdc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn batchdc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
