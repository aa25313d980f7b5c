//! C ABI over the wedgelab harness.
//!
//! Every call returns a [`WlStatus`]. On failure the message is kept per thread and can be read
//! with [`wl_last_error`]. Handles are opaque and owned by the caller until passed to the
//! matching `*_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wedgelab::error::LabError;
use wedgelab::harness::{run, ExperimentConfig, RunReport};
use wedgelab::smatrix::federbush_smatrix;

/// Status codes returned by every `wl_*` function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed and validated experiment config.
pub struct WlConfig {
    inner: ExperimentConfig,
}

/// Result of a harness run.
pub struct WlReport {
    inner: RunReport,
    json: String,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: WlStatus, msg: impl Into<String>) -> WlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn lab_status(e: &LabError) -> WlStatus {
    match e {
        LabError::Config(_) => WlStatus::Config,
        LabError::Io(_) => WlStatus::Io,
        _ => WlStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> WlStatus) -> WlStatus {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(WlStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, WlStatus> {
    if s.is_null() {
        return Err(fail(WlStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(WlStatus::InvalidUtf8, e.to_string()))
}

/// Copies `text` plus a NUL into `buf`. `needed` (if non-null) receives the full size.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> WlStatus {
    let size = text.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        return fail(WlStatus::BufferTooSmall, format!("need {size} bytes, have {len}"));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, text.len());
    *buf.add(text.len()) = 0;
    WlStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread.
#[no_mangle]
pub unsafe extern "C" fn wl_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> WlStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_out(&msg, buf, len, needed)
}

/// Parses a TOML config. On success `*out` holds a new handle.
#[no_mangle]
pub unsafe extern "C" fn wl_config_from_toml(toml: *const c_char, out: *mut *mut WlConfig) -> WlStatus {
    guard(|| {
        if out.is_null() {
            return fail(WlStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ExperimentConfig::from_toml(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(WlConfig { inner }));
                WlStatus::Ok
            }
            Err(e) => fail(lab_status(&e), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wl_config_free(cfg: *mut WlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the selected checks. `jobs = 0` uses every core.
#[no_mangle]
pub unsafe extern "C" fn wl_run(cfg: *const WlConfig, seed: u64, jobs: u32, out: *mut *mut WlReport) -> WlStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(WlStatus::NullPointer, "null config or output handle");
        }
        *out = ptr::null_mut();
        match run(&(*cfg).inner, seed, jobs as usize) {
            Ok(inner) => {
                let json = inner.to_json();
                *out = Box::into_raw(Box::new(WlReport { inner, json }));
                WlStatus::Ok
            }
            Err(e) => fail(lab_status(&e), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wl_report_free(report: *mut WlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Process exit code the CLI would use: 0 when every check is ok, 1 otherwise.
#[no_mangle]
pub unsafe extern "C" fn wl_report_exit_code(report: *const WlReport, code: *mut i32) -> WlStatus {
    if report.is_null() || code.is_null() {
        return fail(WlStatus::NullPointer, "null report or output");
    }
    *code = (*report).inner.exit_code();
    WlStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn wl_report_check_count(report: *const WlReport, count: *mut usize) -> WlStatus {
    if report.is_null() || count.is_null() {
        return fail(WlStatus::NullPointer, "null report or output");
    }
    *count = (*report).inner.checks.len();
    WlStatus::Ok
}

/// Name, ok flag and largest deviation of check `index`. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn wl_report_check(
    report: *const WlReport,
    index: usize,
    name: *mut c_char,
    name_len: usize,
    ok: *mut bool,
    max_deviation: *mut f64,
) -> WlStatus {
    if report.is_null() {
        return fail(WlStatus::NullPointer, "null report");
    }
    let report = &*report;
    let Some(c) = report.inner.checks.get(index) else {
        return fail(WlStatus::OutOfRange, format!("check index {index} out of range"));
    };
    if !ok.is_null() {
        *ok = c.ok;
    }
    if !max_deviation.is_null() {
        *max_deviation = c.max_deviation;
    }
    if name.is_null() {
        return WlStatus::Ok;
    }
    copy_out(&c.check, name, name_len, ptr::null_mut())
}

/// The report as JSON, identical to the CLI's report.json. Call with a null buffer to size it.
#[no_mangle]
pub unsafe extern "C" fn wl_report_json(
    report: *const WlReport,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> WlStatus {
    if report.is_null() {
        return fail(WlStatus::NullPointer, "null report");
    }
    copy_out(&(*report).json, buf, len, needed)
}

/// Writes report.json and per-check CSV files into `dir`.
#[no_mangle]
pub unsafe extern "C" fn wl_report_write(report: *const WlReport, dir: *const c_char) -> WlStatus {
    guard(|| {
        if report.is_null() {
            return fail(WlStatus::NullPointer, "null report");
        }
        let dir = match read_str(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match (*report).inner.write(Path::new(dir)) {
            Ok(()) => WlStatus::Ok,
            Err(e) => fail(lab_status(&e), e.to_string()),
        }
    })
}

/// Federbush two-particle S-matrix at rapidity `theta`, 16×16 row-major with interleaved
/// real and imaginary parts (512 doubles).
#[no_mangle]
pub unsafe extern "C" fn wl_federbush_smatrix(kappa: f64, theta: f64, out: *mut f64, len: usize) -> WlStatus {
    guard(|| {
        if out.is_null() {
            return fail(WlStatus::NullPointer, "null output buffer");
        }
        if len < 512 {
            return fail(WlStatus::BufferTooSmall, format!("need 512 doubles, have {len}"));
        }
        let m = match federbush_smatrix(kappa).eval(theta) {
            Ok(m) => m,
            Err(e) => return fail(lab_status(&e), e.to_string()),
        };
        let out = std::slice::from_raw_parts_mut(out, 512);
        for i in 0..16 {
            for j in 0..16 {
                out[2 * (16 * i + j)] = m[(i, j)].re;
                out[2 * (16 * i + j) + 1] = m[(i, j)].im;
            }
        }
        WlStatus::Ok
    })
}
