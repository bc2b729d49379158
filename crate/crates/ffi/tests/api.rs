use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use flagmirror_ffi::*;

fn sample(n: usize, seed: u64, degree: usize) -> *mut FmParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { fm_params_sample(n, seed, 40, degree, 60, &mut p) }, FmStatus::FmOk);
    p
}

#[test]
fn vertex_series_roundtrip() {
    let p = sample(2, 7, 4);
    let mut s = ptr::null_mut();
    let perm = [1u32, 2];
    unsafe {
        assert_eq!(fm_vertex_series(p, perm.as_ptr(), 2, 0, &mut s), FmStatus::FmOk);
        assert_eq!(fm_series_nvars(s), 1);
        assert_eq!(fm_series_bound(s), 4);
        assert_eq!(fm_series_len(s), 5);
        let mut c = 0.0;
        assert_eq!(fm_series_coefficient(s, [0u32].as_ptr(), 1, &mut c), FmStatus::FmOk);
        assert_eq!(c, 1.0);
        assert_eq!(
            fm_series_coefficient(s, [5u32].as_ptr(), 1, &mut c),
            FmStatus::FmInvalidArgument
        );
        let mut v = 0.0;
        assert_eq!(fm_series_eval(s, p, &mut v), FmStatus::FmOk);
        assert!(v > 1.0 && v.is_finite());
        fm_series_free(s);
        fm_params_free(p);
    }
}

#[test]
fn stab_matrix_is_triangular() {
    let p = sample(3, 2, 1);
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(fm_stab_matrix(p, FmNormalization::FmStab, &mut m), FmStatus::FmOk);
        assert_eq!(fm_matrix_size(m), 6);
        // the total order starts at the identity and ends at the longest element
        let mut perm = [0u32; 3];
        assert_eq!(fm_matrix_fixed_point(m, 5, perm.as_mut_ptr(), 3), FmStatus::FmOk);
        assert_eq!(perm, [3, 2, 1]);
        let mut x = 1.0;
        assert_eq!(fm_matrix_get(m, 5, 0, &mut x), FmStatus::FmOk);
        assert!(x.abs() < 1e-30);
        assert_eq!(fm_matrix_get(m, 6, 0, &mut x), FmStatus::FmInvalidArgument);
        fm_matrix_free(m);
        fm_params_free(p);
    }
}

#[test]
fn errors_set_message() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(fm_params_sample(1, 0, 40, 2, 60, &mut p), FmStatus::FmInvalidArgument);
        assert!(p.is_null());
        let msg = CStr::from_ptr(fm_last_error()).to_str().unwrap();
        assert!(msg.contains("n = 1"), "{msg}");
        assert_eq!(
            fm_params_sample(2, 0, 40, 2, 60, ptr::null_mut()),
            FmStatus::FmNullPointer
        );
        let bad = CString::new("n = ").unwrap();
        assert_eq!(fm_params_from_toml(bad.as_ptr(), &mut p), FmStatus::FmParse);
    }
}

#[test]
fn verify_reports_json() {
    let name = CString::new("diagonal").unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(fm_verify(name.as_ptr(), 2, 7, &mut out), FmStatus::FmOk);
        let text = CStr::from_ptr(out).to_str().unwrap().to_owned();
        fm_string_free(out);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["claims"].as_array().unwrap().iter().all(|c| c["pass"] == true));
        let bogus = CString::new("nope").unwrap();
        assert_eq!(fm_verify(bogus.as_ptr(), 2, 7, &mut out), FmStatus::FmParse);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        fm_params_free(ptr::null_mut());
        fm_series_free(ptr::null_mut());
        fm_matrix_free(ptr::null_mut());
        fm_string_free(ptr::null_mut());
        assert_eq!(fm_params_n(ptr::null()), 0);
    }
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/flagmirror.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        }
    }
}

/// Compile the C smoke test against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // the static library built alongside this test sits next to it in deps/
    let exe = std::env::current_exe().unwrap();
    let lib = std::fs::read_dir(exe.parent().unwrap())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.starts_with("libflagmirror_ffi") && name.ends_with(".a")
        })
        .max_by_key(|e| e.metadata().and_then(|m| m.modified()).ok())
        .expect("static library in deps")
        .path();
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
