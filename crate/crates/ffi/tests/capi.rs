use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use wedgelab_ffi::*;

const TOML: &str = "seed = 7\nn_max = 3\nchecks = [\"zf-federbush\", \"smatrix-federbush\"]\n\
[grid]\nhalf_width = 2.0\nn_points = 3\nmass = 1.0\n[model]\nkind = \"federbush\"\nkappa = 0.25\n";

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let s = unsafe { wl_last_error(buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(s, WlStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn config(text: &str) -> Result<*mut WlConfig, WlStatus> {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    match unsafe { wl_config_from_toml(c.as_ptr(), &mut out) } {
        WlStatus::Ok => Ok(out),
        s => {
            assert!(out.is_null());
            Err(s)
        }
    }
}

#[test]
fn run_and_inspect_report() {
    let cfg = config(TOML).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { wl_run(cfg, 7, 1, &mut report) }, WlStatus::Ok);
    let mut count = 0;
    let mut code = -1;
    unsafe {
        assert_eq!(wl_report_check_count(report, &mut count), WlStatus::Ok);
        assert_eq!(wl_report_exit_code(report, &mut code), WlStatus::Ok);
    }
    assert_eq!((count, code), (2, 0));
    let mut name = [0 as std::ffi::c_char; 64];
    let (mut ok, mut dev) = (false, f64::NAN);
    for i in 0..count {
        let s = unsafe { wl_report_check(report, i, name.as_mut_ptr(), name.len(), &mut ok, &mut dev) };
        assert_eq!(s, WlStatus::Ok);
        assert!(ok && dev < 1e-10);
    }
    assert_eq!(
        unsafe { wl_report_check(report, count, ptr::null_mut(), 0, ptr::null_mut(), ptr::null_mut()) },
        WlStatus::OutOfRange
    );

    let mut needed = 0;
    let s = unsafe { wl_report_json(report, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(s, WlStatus::BufferTooSmall);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(unsafe { wl_report_json(report, buf.as_mut_ptr(), needed, &mut needed) }, WlStatus::Ok);
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);

    let dir = tempfile::TempDir::new().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { wl_report_write(report, path.as_ptr()) }, WlStatus::Ok);
    assert_eq!(std::fs::read_to_string(dir.path().join("report.json")).unwrap(), json);
    unsafe {
        wl_report_free(report);
        wl_config_free(cfg);
    }
}

#[test]
fn errors_are_reported() {
    assert_eq!(config("model = [").unwrap_err(), WlStatus::Config);
    assert!(!last_error().is_empty());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { wl_config_from_toml(ptr::null(), &mut out) }, WlStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { wl_config_from_toml(bad.as_ptr().cast(), &mut out) }, WlStatus::InvalidUtf8);
    assert_eq!(unsafe { wl_run(ptr::null(), 0, 1, &mut ptr::null_mut()) }, WlStatus::NullPointer);
    unsafe {
        wl_config_free(ptr::null_mut());
        wl_report_free(ptr::null_mut());
    }
    let mut small = [0.0; 8];
    assert_eq!(
        unsafe { wl_federbush_smatrix(0.25, 0.0, small.as_mut_ptr(), small.len()) },
        WlStatus::BufferTooSmall
    );
}

#[test]
fn federbush_matrix_layout() {
    let mut m = vec![0.0; 512];
    assert_eq!(unsafe { wl_federbush_smatrix(0.25, 0.7, m.as_mut_ptr(), m.len()) }, WlStatus::Ok);
    let expected = wedgelab::smatrix::federbush_smatrix(0.25).eval(0.7).unwrap();
    for i in 0..16 {
        for j in 0..16 {
            assert_eq!(m[2 * (16 * i + j)], expected[(i, j)].re);
            assert_eq!(m[2 * (16 * i + j) + 1], expected[(i, j)].im);
        }
    }
    let v = unsafe { CStr::from_ptr(wl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/wedgelab.h")).unwrap();
    for sym in [
        "wl_version",
        "wl_last_error",
        "wl_config_from_toml",
        "wl_config_free",
        "wl_run",
        "wl_report_free",
        "wl_report_check",
        "wl_report_json",
        "wl_report_write",
        "wl_federbush_smatrix",
        "typedef struct WlConfig WlConfig;",
        "WL_STATUS_BUFFER_TOO_SMALL = 7",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

const C_SMOKE: &str = r#"
#include <stdio.h>
#include "wedgelab.h"

int main(void) {
    double m[512];
    if (wl_federbush_smatrix(0.25, 0.0, m, 512) != WL_STATUS_OK) return 1;
    WlConfig *cfg = NULL;
    if (wl_config_from_toml("model = [", &cfg) != WL_STATUS_CONFIG || cfg != NULL) return 2;
    char msg[256];
    if (wl_last_error(msg, sizeof msg, NULL) != WL_STATUS_OK || msg[0] == 0) return 3;
    printf("%s %.3f %.3f\n", wl_version(), m[0], m[1]);
    return 0;
}
"#;

fn staticlib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libwedgelab_ffi.a");
    lib.exists().then_some(lib)
}

fn cc(args: &[&Path]) -> Command {
    let mut cmd = Command::new("cc");
    cmd.args(args);
    cmd
}

#[test]
fn header_compiles_as_c_and_links() {
    let dir = tempfile::TempDir::new().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let include = crate_dir().join("include");
    let status = cc(&[Path::new("-std=c99"), Path::new("-Wall"), Path::new("-Werror"), Path::new("-fsyntax-only")])
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .status()
        .expect("cc available");
    assert!(status.success());
    let Some(lib) = staticlib() else {
        eprintln!("staticlib not built for this profile; link step skipped");
        return;
    };
    let exe = dir.path().join("smoke");
    let status = cc(&[&src, &lib])
        .arg("-I")
        .arg(&include)
        .arg("-o")
        .arg(&exe)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
}
