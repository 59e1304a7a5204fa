//! C ABI for the specsched simulator.
//!
//! Workloads and reports are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a
//! [`SpecschedStatus`]; on failure the message is available from
//! [`specsched_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use specsched::builtin;
use specsched::config::{cost_table, ConfigBuilder, ExperimentConfig};
use specsched::estimator::estimate_execution_time;
use specsched::model::{CostModel, RequestSpec, SimTime};
use specsched::report::run_one;
use specsched::workload::{generate_workload, load_trace, save_trace};
use specsched::{PolicyKind, SimReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecschedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Trace = 5,
    Simulation = 6,
    Panic = 7,
}

/// A list of requests, loaded, generated or taken from a built-in trace.
pub struct SpecschedWorkload {
    requests: Vec<RequestSpec>,
    cost: Option<CostModel>,
}

/// The result of one simulation.
pub struct SpecschedReport {
    report: SimReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecschedSummary {
    pub num_requests: usize,
    pub avg_latency_us: f64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub max_us: u64,
    pub preemptions: u64,
    pub switch_count: u64,
    pub switch_overhead_us: u64,
    pub busy_us: u64,
    pub makespan_us: u64,
}

/// Per-request outcome. Optional estimates are negative when absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecschedRequestRecord {
    pub id: u64,
    pub arrival_us: u64,
    pub first_service_us: u64,
    pub completion_us: u64,
    pub latency_us: u64,
    pub rounds: u64,
    pub tokens_proposed: u64,
    pub tokens_accepted: u64,
    pub preemptions: u32,
    pub service_us: u64,
    pub predicted_accept_rate: f64,
    pub estimated_total_us: i64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SpecschedStatus, String);

impl Failure {
    fn new(status: SpecschedStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpecschedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SpecschedStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SpecschedStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(SpecschedStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(SpecschedStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(SpecschedStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(SpecschedStatus::NullPointer, "out is null"))
    } else {
        Ok(())
    }
}

fn build_config(toml: Option<&str>, cost: Option<&CostModel>) -> Result<ExperimentConfig, Failure> {
    let cfg_err = |e: specsched::workload::ConfigError| Failure::new(SpecschedStatus::Config, e);
    let mut b = ConfigBuilder::new();
    if let Some(c) = cost {
        b = b.layer(cost_table(c));
    }
    if let Some(t) = toml {
        b = b.layer_str(t).map_err(cfg_err)?;
    }
    b.build().map_err(cfg_err)
}

fn boxed<T>(value: T, out: *mut *mut T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn specsched_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn specsched_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSON Lines trace file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_workload_load(
    path: *const c_char,
    out: *mut *mut SpecschedWorkload,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let path = str_arg(path, "path")?;
        let requests = load_trace(path).map_err(|e| Failure::new(SpecschedStatus::Trace, e))?;
        boxed(SpecschedWorkload { requests, cost: None }, out);
        Ok(())
    })
}

/// Takes a built-in trace by name, with or without the `builtin:` prefix.
/// Its cost model, if any, is used by [`specsched_simulate`] beneath the
/// caller's config.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_workload_builtin(
    name: *const c_char,
    out: *mut *mut SpecschedWorkload,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let name = str_arg(name, "name")?;
        let t = builtin::builtin(name).ok_or_else(|| {
            Failure::new(
                SpecschedStatus::InvalidArgument,
                format!("unknown built-in trace `{name}` (valid: {})", builtin::NAMES.join(", ")),
            )
        })?;
        boxed(SpecschedWorkload { requests: t.requests, cost: t.cost }, out);
        Ok(())
    })
}

/// Generates a workload from a TOML config (NULL for the defaults).
///
/// # Safety
/// `config_toml` must be NULL or a valid NUL-terminated string and `out` a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_workload_generate(
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut SpecschedWorkload,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let cfg = build_config(opt_str_arg(config_toml, "config_toml")?, None)?.with_seed(seed);
        let requests =
            generate_workload(&cfg.workload).map_err(|e| Failure::new(SpecschedStatus::Config, e))?;
        boxed(SpecschedWorkload { requests, cost: None }, out);
        Ok(())
    })
}

/// Writes the workload as a JSON Lines trace.
///
/// # Safety
/// `workload` must come from this library and `path` must be a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn specsched_workload_save(
    workload: *const SpecschedWorkload,
    path: *const c_char,
) -> SpecschedStatus {
    guard(|| {
        let w = handle(workload, "workload")?;
        let path = str_arg(path, "path")?;
        save_trace(path, &w.requests).map_err(|e| Failure::new(SpecschedStatus::Trace, e))
    })
}

/// Number of requests, or 0 for NULL.
///
/// # Safety
/// `workload` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn specsched_workload_len(workload: *const SpecschedWorkload) -> usize {
    workload.as_ref().map_or(0, |w| w.requests.len())
}

/// # Safety
/// `workload` must be NULL or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn specsched_workload_free(workload: *mut SpecschedWorkload) {
    if !workload.is_null() {
        drop(Box::from_raw(workload));
    }
}

/// Simulates `policy` (`fcfs`, `lp-sjf`, `las` or `laps-sd`) on the workload.
/// `config_toml` may be NULL for the defaults.
///
/// # Safety
/// `workload` must come from this library, `policy` must be a valid
/// NUL-terminated string, `config_toml` NULL or a valid string, and `out` a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_simulate(
    workload: *const SpecschedWorkload,
    policy: *const c_char,
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut SpecschedReport,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let w = handle(workload, "workload")?;
        let name = str_arg(policy, "policy")?;
        let kind: PolicyKind = name.parse().map_err(|_| {
            Failure::new(
                SpecschedStatus::InvalidArgument,
                format!("unknown policy `{name}` (valid: {})", PolicyKind::valid_names()),
            )
        })?;
        let cfg = build_config(opt_str_arg(config_toml, "config_toml")?, w.cost.as_ref())?;
        let report = run_one(&w.requests, kind, &cfg, seed)
            .map_err(|e| Failure::new(SpecschedStatus::Simulation, e))?;
        boxed(SpecschedReport { report }, out);
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and `out` be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_report_summary(
    report: *const SpecschedReport,
    out: *mut SpecschedSummary,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let r = &handle(report, "report")?.report;
        *out = SpecschedSummary {
            num_requests: r.num_requests,
            avg_latency_us: r.avg_latency_us,
            p50_us: r.p50_us,
            p95_us: r.p95_us,
            max_us: r.max_us,
            preemptions: r.preemptions,
            switch_count: r.switch_count,
            switch_overhead_us: r.switch_overhead_us,
            busy_us: r.busy_us,
            makespan_us: r.makespan_us,
        };
        Ok(())
    })
}

/// Number of request records, or 0 for NULL.
///
/// # Safety
/// `report` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn specsched_report_len(report: *const SpecschedReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.requests.len())
}

/// Record `index`, ordered by request id.
///
/// # Safety
/// `report` must come from this library and `out` be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_report_request(
    report: *const SpecschedReport,
    index: usize,
    out: *mut SpecschedRequestRecord,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let r = &handle(report, "report")?.report;
        let rec = r.requests.get(index).ok_or_else(|| {
            Failure::new(
                SpecschedStatus::InvalidArgument,
                format!("index {index} out of range for {} requests", r.requests.len()),
            )
        })?;
        *out = SpecschedRequestRecord {
            id: rec.id,
            arrival_us: rec.arrival_us,
            first_service_us: rec.first_service_us,
            completion_us: rec.completion_us,
            latency_us: rec.latency_us,
            rounds: rec.rounds,
            tokens_proposed: rec.tokens_proposed,
            tokens_accepted: rec.tokens_accepted,
            preemptions: rec.preemptions,
            service_us: rec.service_us,
            predicted_accept_rate: rec.predicted_accept_rate.unwrap_or(-1.0),
            estimated_total_us: rec
                .estimated_total_us
                .map_or(-1, |v| i64::try_from(v).unwrap_or(i64::MAX)),
        };
        Ok(())
    })
}

/// The report as JSON. Release the string with [`specsched_string_free`].
///
/// # Safety
/// `report` must come from this library and `out` be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn specsched_report_to_json(
    report: *const SpecschedReport,
    out: *mut *mut c_char,
) -> SpecschedStatus {
    guard(|| {
        out_ptr(out)?;
        let r = handle(report, "report")?;
        let json = CString::new(r.report.to_json())
            .map_err(|e| Failure::new(SpecschedStatus::Simulation, e))?;
        *out = json.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn specsched_report_free(report: *mut SpecschedReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, and not be used
/// again.
#[no_mangle]
pub unsafe extern "C" fn specsched_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Estimated execution time in microseconds for `length` tokens at draft
/// acceptance rate `accept_rate`.
#[no_mangle]
pub extern "C" fn specsched_estimate_execution_time_us(
    length: u64,
    accept_rate: f64,
    spec_len: u32,
    t_ssm_per_token_us: u64,
    t_llm_verify_us: u64,
) -> u64 {
    estimate_execution_time(
        length,
        accept_rate,
        spec_len,
        SimTime::from_us(t_ssm_per_token_us),
        SimTime::from_us(t_llm_verify_us),
    )
    .as_us()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn guard_records_messages() {
        let s = guard(|| Err(Failure::new(SpecschedStatus::Config, "bad key")));
        assert_eq!(s, SpecschedStatus::Config);
        let msg = unsafe { CStr::from_ptr(specsched_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "bad key");
        assert_eq!(guard(|| Ok(())), SpecschedStatus::Ok);
        let msg = unsafe { CStr::from_ptr(specsched_last_error()) };
        assert!(msg.to_bytes().is_empty());
    }

    #[test]
    fn guard_catches_panics() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let s = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(s, SpecschedStatus::Panic);
    }

    #[test]
    fn null_out_is_rejected() {
        let s = unsafe { specsched_workload_builtin(c"fig1".as_ptr(), ptr::null_mut()) };
        assert_eq!(s, SpecschedStatus::NullPointer);
    }
}
