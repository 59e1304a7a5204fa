use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use specsched_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(specsched_last_error()) }.to_string_lossy().into_owned()
}

fn builtin(name: &str) -> *mut SpecschedWorkload {
    let name = CString::new(name).unwrap();
    let mut w = ptr::null_mut();
    let s = unsafe { specsched_workload_builtin(name.as_ptr(), &mut w) };
    assert_eq!(s, SpecschedStatus::Ok, "{}", last_error());
    w
}

fn simulate(w: *const SpecschedWorkload, policy: &str, config: Option<&str>) -> *mut SpecschedReport {
    let policy = CString::new(policy).unwrap();
    let config = config.map(|c| CString::new(c).unwrap());
    let mut r = ptr::null_mut();
    let s = unsafe {
        specsched_simulate(w, policy.as_ptr(), config.as_ref().map_or(ptr::null(), |c| c.as_ptr()), 0, &mut r)
    };
    assert_eq!(s, SpecschedStatus::Ok, "{}", last_error());
    r
}

fn summary(r: *const SpecschedReport) -> SpecschedSummary {
    let mut out = SpecschedSummary::default();
    assert_eq!(unsafe { specsched_report_summary(r, &mut out) }, SpecschedStatus::Ok);
    out
}

#[test]
fn fig1_through_the_c_abi() {
    let w = builtin("fig1");
    assert_eq!(unsafe { specsched_workload_len(w) }, 3);

    let fcfs = simulate(w, "fcfs", None);
    assert_eq!(summary(fcfs).avg_latency_us, 600_000.0);
    let laps = simulate(w, "laps-sd", Some("[laps_sd]\nestimates = \"oracle\"\n"));
    assert_eq!(summary(laps).avg_latency_us, 500_000.0);

    assert_eq!(unsafe { specsched_report_len(laps) }, 3);
    let mut rec = SpecschedRequestRecord::default();
    assert_eq!(unsafe { specsched_report_request(laps, 1, &mut rec) }, SpecschedStatus::Ok);
    assert_eq!(rec.id, 2);
    assert_eq!(rec.latency_us, 900_000);
    assert!(rec.estimated_total_us > 0);

    let bad = unsafe { specsched_report_request(laps, 3, &mut rec) };
    assert_eq!(bad, SpecschedStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { specsched_report_to_json(fcfs, &mut json) }, SpecschedStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { specsched_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["policy"], "fcfs");

    unsafe {
        specsched_report_free(fcfs);
        specsched_report_free(laps);
        specsched_workload_free(w);
    }
}

#[test]
fn generate_save_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.jsonl").to_str().unwrap()).unwrap();
    let config = CString::new("num_requests = 12\nprofile = \"code\"\n").unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { specsched_workload_generate(config.as_ptr(), 3, &mut w) }, SpecschedStatus::Ok);
    assert_eq!(unsafe { specsched_workload_len(w) }, 12);
    assert_eq!(unsafe { specsched_workload_save(w, path.as_ptr()) }, SpecschedStatus::Ok);

    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { specsched_workload_load(path.as_ptr(), &mut loaded) }, SpecschedStatus::Ok);
    let a = simulate(w, "las", None);
    let b = simulate(loaded, "las", None);
    let (sa, sb) = (summary(a), summary(b));
    assert_eq!(sa.avg_latency_us, sb.avg_latency_us);
    assert_eq!(sa.busy_us, sb.busy_us);
    unsafe {
        specsched_report_free(a);
        specsched_report_free(b);
        specsched_workload_free(w);
        specsched_workload_free(loaded);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let w = builtin("builtin:tiny-sjf");
    let policy = CString::new("srpt").unwrap();
    let mut r = ptr::null_mut();
    let s = unsafe { specsched_simulate(w, policy.as_ptr(), ptr::null(), 0, &mut r) };
    assert_eq!(s, SpecschedStatus::InvalidArgument);
    assert!(last_error().contains("laps-sd"));
    assert!(r.is_null());

    let policy = CString::new("fcfs").unwrap();
    let config = CString::new("[stability]\ngamma = 1\n").unwrap();
    let s = unsafe { specsched_simulate(w, policy.as_ptr(), config.as_ptr(), 0, &mut r) };
    assert_eq!(s, SpecschedStatus::Config);
    assert!(last_error().contains("stability.gamma"));

    let s = unsafe { specsched_simulate(ptr::null(), policy.as_ptr(), ptr::null(), 0, &mut r) };
    assert_eq!(s, SpecschedStatus::NullPointer);

    let missing = CString::new("/nonexistent/trace.jsonl").unwrap();
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { specsched_workload_load(missing.as_ptr(), &mut loaded) }, SpecschedStatus::Trace);

    let name = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { specsched_workload_builtin(name.as_ptr(), &mut loaded) },
        SpecschedStatus::InvalidArgument
    );
    unsafe {
        specsched_workload_free(w);
        specsched_workload_free(ptr::null_mut());
        specsched_report_free(ptr::null_mut());
        specsched_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { specsched_workload_len(ptr::null()) }, 0);
}

#[test]
fn errors_are_per_thread() {
    let name = CString::new("nope").unwrap();
    let mut w = ptr::null_mut();
    unsafe { specsched_workload_builtin(name.as_ptr(), &mut w) };
    assert!(!last_error().is_empty());
    std::thread::spawn(|| assert!(last_error().is_empty())).join().unwrap();
}

#[test]
fn estimate_matches_hand_value() {
    // 4*100*1ms/3 + 100*10ms/3
    assert_eq!(specsched_estimate_execution_time_us(100, 0.5, 4, 1_000, 10_000), 466_667);
    assert_eq!(specsched_estimate_execution_time_us(0, 0.5, 4, 1_000, 10_000), 0);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(specsched_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/specsched.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["specsched_simulate", "specsched_last_error", "SPECSCHED_STATUS_PANIC", "typedef struct SpecschedReport"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(o) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"]).arg(&header).output()
    else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
