//! C ABI over the sharecut engine.
//!
//! An `ScEngine` owns a workload, its generated database and, after tuning,
//! the partitioned layout and materialized views. Every call returns an
//! `ScStatus`; on failure `sc_last_error` describes the problem for the
//! calling thread. Strings returned by the engine stay valid until the next
//! call on the same engine.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sharecut::config::{Budget, EngineConfig, ReuseMode, Solver};
use sharecut::error::Error;
use sharecut::executor::{execute_batch, BatchMetrics};
use sharecut::materializer::ViewStore;
use sharecut::storage::{generate_database, Database, Layout, PartitionTree};
use sharecut::tuner::{derive_layout, tune};
use sharecut::workload::{parse_workload, Workload};

/// Result of every call. Values 2 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an index out of range.
    InvalidArgument = 1,
    /// Bad configuration or workload text.
    Config = 2,
    /// Bad data or I/O failure.
    Data = 3,
    /// Execution failure or broken internal invariant.
    Execution = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque engine handle.
pub struct ScEngine {
    workload: Workload,
    cfg: EngineConfig,
    db: Database,
    layout: Layout,
    views: ViewStore,
    results: Vec<Vec<i64>>,
    metrics: Option<BatchMetrics>,
    text: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> ScStatus {
    match e.exit_code() {
        2 => ScStatus::Config,
        3 => ScStatus::Data,
        _ => ScStatus::Execution,
    }
}

struct Fail(ScStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(ScStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ScStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    // SAFETY: caller passes a nul-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(e: *mut ScEngine) -> Result<&'a mut ScEngine, Fail> {
    // SAFETY: non-null handles come from sc_engine_new and are not shared
    // across threads without external locking.
    unsafe { e.as_mut() }.ok_or_else(|| invalid("engine is null"))
}

impl ScEngine {
    fn set(&mut self, key: &str, value: &str) -> Result<(), Fail> {
        let bad = || Fail(ScStatus::Config, format!("bad value `{value}` for `{key}`"));
        let flag = || match value {
            "1" | "true" | "on" => Ok(true),
            "0" | "false" | "off" => Ok(false),
            _ => Err(bad()),
        };
        let mut cfg = self.cfg.clone();
        match key {
            "psmin" => cfg.ps_min = value.parse().map_err(|_| bad())?,
            "sample_rate" => cfg.sample_rate = value.parse().map_err(|_| bad())?,
            "block_min" => {
                cfg.block_min_rows = value.parse().map_err(|_| bad())?;
                cfg.block_max_rows = cfg.block_max_rows.max(cfg.block_min_rows);
            }
            "threads" => cfg.threads = value.parse().map_err(|_| bad())?,
            "skipping" => cfg.skipping = flag()?,
            "partitioning" => cfg.partitioning = flag()?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            "solver" => cfg.solver = value.parse::<Solver>()?,
            "reuse" => {
                cfg.reuse = match value {
                    "off" => ReuseMode::Off,
                    "naive" => ReuseMode::Naive,
                    "optimized" => ReuseMode::Optimized,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(Fail(ScStatus::Config, format!("unknown option `{key}`"))),
        }
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }
}

/// Parses `workload` (workload file text) and generates its database with
/// `seed`. On success stores a new handle in `*out`.
///
/// # Safety
/// `workload` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_new(workload: *const c_char, seed: u64, out: *mut *mut ScEngine) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        // SAFETY: checked non-null above.
        unsafe { *out = ptr::null_mut() };
        let text = unsafe { str_arg(workload, "workload") }?;
        let workload = parse_workload(text)?;
        let cfg = EngineConfig {
            seed,
            ..EngineConfig::default()
        };
        let raw = generate_database(&workload.schema, seed)?;
        // Before tuning: one partition, no views.
        let (db, layout) = derive_layout(&raw, PartitionTree::single(), &workload.tuning, &cfg)?;
        let e = ScEngine {
            workload,
            cfg,
            layout,
            db,
            views: ViewStore::default(),
            results: Vec::new(),
            metrics: None,
            text: CString::default(),
        };
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(e)) };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `engine` must come from `sc_engine_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_free(engine: *mut ScEngine) {
    if !engine.is_null() {
        // SAFETY: the handle was created by Box::into_raw in sc_engine_new.
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Sets an engine option. Keys: psmin, sample_rate, block_min, threads,
/// skipping, partitioning, seed, solver (gr|isk), reuse
/// (off|naive|optimized). Layout options apply from the next tune,
/// execution options from the next run.
///
/// # Safety
/// `engine` must be a live handle; `key` and `value` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_set(engine: *mut ScEngine, key: *const c_char, value: *const c_char) -> ScStatus {
    guard(|| {
        let e = unsafe { handle(engine) }?;
        let key = unsafe { str_arg(key, "key") }?;
        let value = unsafe { str_arg(value, "value") }?;
        e.set(key, value)
    })
}

/// Partitions the data and materializes views for the tuning batches.
/// `budget` is a byte count or a percentage of full coverage ("40%").
///
/// # Safety
/// `engine` must be a live handle; `budget` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_tune(engine: *mut ScEngine, budget: *const c_char) -> ScStatus {
    guard(|| {
        let e = unsafe { handle(engine) }?;
        let budget: Budget = unsafe { str_arg(budget, "budget") }?.parse()?;
        let tuned = tune(&e.db, &e.workload.tuning, budget, &e.cfg)?;
        e.db = tuned.db;
        e.layout = tuned.layout;
        e.views = tuned.views;
        Ok(())
    })
}

/// Number of runtime batches in the workload.
///
/// # Safety
/// `engine` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sc_engine_batch_count(engine: *const ScEngine) -> usize {
    // SAFETY: see function contract.
    unsafe { engine.as_ref() }.map_or(0, |e| e.workload.runtime.len())
}

/// Executes runtime batch `batch`. Results and metrics replace those of the
/// previous run.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_run(engine: *mut ScEngine, batch: usize) -> ScStatus {
    guard(|| {
        let e = unsafe { handle(engine) }?;
        let b = e
            .workload
            .runtime
            .get(batch)
            .ok_or_else(|| invalid(format!("batch {batch} out of range")))?;
        let out = execute_batch(&e.db, &e.layout, &e.views, b, &e.cfg)?;
        e.results = out.results;
        e.metrics = Some(out.metrics);
        Ok(())
    })
}

/// Number of queries answered by the last run.
///
/// # Safety
/// `engine` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sc_engine_query_count(engine: *const ScEngine) -> usize {
    // SAFETY: see function contract.
    unsafe { engine.as_ref() }.map_or(0, |e| e.results.len())
}

/// Number of groups of query `query` in the last run (1 when ungrouped).
///
/// # Safety
/// `engine` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sc_engine_group_count(engine: *const ScEngine, query: usize) -> usize {
    // SAFETY: see function contract.
    unsafe { engine.as_ref() }
        .and_then(|e| e.results.get(query))
        .map_or(0, Vec::len)
}

/// Writes the sum for group `group` of query `query` into `*out`.
///
/// # Safety
/// `engine` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_result(engine: *const ScEngine, query: usize, group: usize, out: *mut i64) -> ScStatus {
    guard(|| {
        // SAFETY: see function contract.
        let e = unsafe { engine.as_ref() }.ok_or_else(|| invalid("engine is null"))?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let v = e
            .results
            .get(query)
            .and_then(|r| r.get(group))
            .ok_or_else(|| invalid(format!("query {query} group {group} out of range")))?;
        // SAFETY: checked non-null above.
        unsafe { *out = *v };
        Ok(())
    })
}

/// Metrics of the last run as JSON, or null before the first run. The
/// string is owned by the engine.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_engine_metrics_json(engine: *mut ScEngine) -> *const c_char {
    let mut out = ptr::null();
    let status = guard(|| {
        let e = unsafe { handle(engine) }?;
        let Some(m) = &e.metrics else {
            return Err(invalid("no run yet"));
        };
        let json = serde_json::to_string(m).map_err(|err| Fail(ScStatus::Execution, err.to_string()))?;
        e.text = CString::new(json).map_err(|err| Fail(ScStatus::Execution, err.to_string()))?;
        out = e.text.as_ptr();
        Ok(())
    });
    if status == ScStatus::Ok {
        out
    } else {
        ptr::null()
    }
}

/// Message of the last failed call on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
