use std::ffi::{c_void, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ratchoice::conflict::{Feature, NormParams, N_FEATURES};
use ratchoice::expectations::{logistic, ExpectationModel};
use ratchoice_ffi::*;

fn last_error() -> String {
    let p = rc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

/// `logistic(2 - 6 * democracy_scaled)` with democracy scaled from [-10, 10].
fn write_model(dir: &Path) -> (CString, CString) {
    let mut row = vec![0.0; N_FEATURES + 1];
    row[Feature::Democracy.index()] = -6.0;
    row[N_FEATURES] = 2.0;
    let model = ExpectationModel::from_layers(&[N_FEATURES, 1], vec![row]).unwrap();
    let norm = NormParams {
        min: [0.0, 0.0, 0.0, 0.0, -10.0, 0.0, 0.0],
        max: [1.0, 1.0, 20.0, 1.0, 10.0, 0.5, 3.0],
    };
    let m = dir.join("model.txt");
    let n = dir.join("norm.txt");
    model.save(&m).unwrap();
    norm.save(&n).unwrap();
    (
        CString::new(m.to_str().unwrap()).unwrap(),
        CString::new(n.to_str().unwrap()).unwrap(),
    )
}

fn load(dir: &Path) -> *mut RcModel {
    let (m, n) = write_model(dir);
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { rc_model_load(m.as_ptr(), n.as_ptr(), &mut handle) }, RcStatus::Ok);
    assert!(!handle.is_null());
    handle
}

#[test]
fn inverse_cost_and_errors() {
    let mut u = 0.0;
    assert_eq!(unsafe { rc_inverse_cost_utility(18.0, &mut u) }, RcStatus::Ok);
    assert!((u - 0.05555556).abs() < 1e-8);
    assert!(rc_last_error_message().is_null());

    assert_eq!(unsafe { rc_inverse_cost_utility(-1.0, &mut u) }, RcStatus::InvalidInput);
    assert!(last_error().contains("cost"));
    assert_eq!(unsafe { rc_inverse_cost_utility(1.0, ptr::null_mut()) }, RcStatus::NullArgument);
    assert!(last_error().contains("utility_out"));
}

#[test]
fn ranking_by_cost() {
    let costs = [18.0, 36.0, 24.0, 26.0];
    let mut order = [0usize; 4];
    let mut util = [0.0; 4];
    assert_eq!(unsafe { rc_rank_by_cost(costs.as_ptr(), 4, order.as_mut_ptr(), util.as_mut_ptr()) }, RcStatus::Ok);
    assert_eq!(order, [0, 2, 3, 1]);
    for (k, i) in order.iter().enumerate() {
        assert_eq!(util[k], 1.0 / costs[*i]);
    }

    // ties keep index order, including past ten entries
    let flat = [5.0; 12];
    let mut order = [0usize; 12];
    let mut util = [0.0; 12];
    assert_eq!(unsafe { rc_rank_by_cost(flat.as_ptr(), 12, order.as_mut_ptr(), util.as_mut_ptr()) }, RcStatus::Ok);
    assert_eq!(order.to_vec(), (0..12).collect::<Vec<_>>());

    assert_eq!(unsafe { rc_rank_by_cost(costs.as_ptr(), 0, order.as_mut_ptr(), util.as_mut_ptr()) }, RcStatus::InvalidInput);
    let bad = [1.0, f64::NAN];
    assert_eq!(unsafe { rc_rank_by_cost(bad.as_ptr(), 2, order.as_mut_ptr(), util.as_mut_ptr()) }, RcStatus::InvalidInput);
}

unsafe extern "C" fn shifted_square(x: f64, ctx: *mut c_void) -> f64 {
    let c = &mut *(ctx as *mut (f64, usize));
    c.1 += 1;
    (x - c.0).powi(2)
}

unsafe extern "C" fn nan_objective(_: f64, _: *mut c_void) -> f64 {
    f64::NAN
}

#[test]
fn golden_section_callback() {
    let mut ctx = (0.3_f64, 0_usize);
    let (mut x, mut v) = (0.0, 0.0);
    let status = unsafe {
        rc_golden_section(Some(shifted_square), &mut ctx as *mut _ as *mut c_void, -1.0, 2.0, 1e-8, 200, &mut x, &mut v)
    };
    assert_eq!(status, RcStatus::Ok);
    assert!((x - 0.3).abs() < 1e-7);
    assert!(ctx.1 > 10);

    let status = unsafe { rc_golden_section(None, ptr::null_mut(), 0.0, 1.0, 1e-6, 10, &mut x, &mut v) };
    assert_eq!(status, RcStatus::NullArgument);
    let status = unsafe { rc_golden_section(Some(nan_objective), ptr::null_mut(), 0.0, 1.0, 1e-6, 10, &mut x, &mut v) };
    assert_eq!(status, RcStatus::Numerical);
    let status = unsafe { rc_golden_section(Some(shifted_square), ptr::null_mut(), 1.0, 0.0, 1e-6, 10, &mut x, &mut v) };
    assert_eq!(status, RcStatus::InvalidInput);
}

#[test]
fn model_handle_risk_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let handle = load(dir.path());
    let features = [0.0, 1.0, 2.0, 0.0, -5.0, 0.05, 0.5];

    let mut r = 0.0;
    assert_eq!(unsafe { rc_model_risk(handle, features.as_ptr(), &mut r) }, RcStatus::Ok);
    assert!((r - logistic(2.0 - 6.0 * 0.25)).abs() < 1e-12);

    let mut controlled = [0.0; RC_N_FEATURES];
    let (mut before, mut after) = (0.0, 0.0);
    let status = unsafe {
        rc_control_single(handle, features.as_ptr(), RcVariable::Democracy, controlled.as_mut_ptr(), &mut before, &mut after)
    };
    assert_eq!(status, RcStatus::Ok);
    assert_eq!(before, r);
    assert!((after - logistic(-4.0)).abs() < 1e-12);
    assert_eq!(controlled[Feature::Democracy.index()], 10.0);
    for j in (0..RC_N_FEATURES).filter(|&j| j != Feature::Democracy.index()) {
        assert_eq!(controlled[j], features[j]);
    }

    // binary features must be 0 or 1
    let mut bad = features;
    bad[Feature::Allies.index()] = 0.5;
    assert_eq!(unsafe { rc_model_risk(handle, bad.as_ptr(), &mut r) }, RcStatus::InvalidInput);
    assert!(last_error().contains("allies"));
    assert_eq!(unsafe { rc_model_risk(ptr::null(), features.as_ptr(), &mut r) }, RcStatus::NullArgument);

    unsafe { rc_model_free(handle) };
    unsafe { rc_model_free(ptr::null_mut()) };
}

#[test]
fn model_load_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (_, norm) = write_model(dir.path());
    let missing = CString::new(dir.path().join("nope.txt").to_str().unwrap()).unwrap();
    let mut handle = 1 as *mut RcModel;
    assert_eq!(unsafe { rc_model_load(missing.as_ptr(), norm.as_ptr(), &mut handle) }, RcStatus::Io);
    assert!(handle.is_null());
    assert!(last_error().contains("nope.txt"));
    assert_eq!(unsafe { rc_model_load(ptr::null(), norm.as_ptr(), &mut handle) }, RcStatus::NullArgument);

    let garbage = dir.path().join("garbage.txt");
    std::fs::write(&garbage, "not a model\n").unwrap();
    let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rc_model_load(garbage.as_ptr(), norm.as_ptr(), &mut handle) }, RcStatus::InvalidInput);
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(rc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/ratchoice.h")).unwrap();
    for name in [
        "rc_last_error_message",
        "rc_version",
        "rc_inverse_cost_utility",
        "rc_rank_by_cost",
        "rc_golden_section",
        "rc_model_load",
        "rc_model_free",
        "rc_model_risk",
        "rc_control_single",
        "typedef struct RcModel RcModel;",
        "#define RC_N_FEATURES 7",
        "RC_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the generated header and the
/// static library built alongside this test.
#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libratchoice_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ratchoice.h"

static double sq(double x, void *ctx) { (void)ctx; return (x - 1.5) * (x - 1.5); }

int main(void) {
    double u = 0.0;
    if (rc_inverse_cost_utility(24.0, &u) != RC_STATUS_OK) return 1;
    double x = 0.0, v = 0.0;
    if (rc_golden_section(sq, NULL, 0.0, 4.0, 1e-9, 200, &x, &v) != RC_STATUS_OK) return 2;
    if (rc_inverse_cost_utility(0.0, &u) != RC_STATUS_INVALID_INPUT) return 3;
    if (rc_last_error_message() == NULL) return 4;
    printf("%.8f %.6f\n", 1.0 / 24.0, x);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0.04166667 1.500000\n");
}
