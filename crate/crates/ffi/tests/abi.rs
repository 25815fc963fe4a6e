use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use rvwalk_ffi::*;

fn spec(json: &str) -> *mut RvwMemorySpec {
    let json = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rvw_memory_spec_from_json(json.as_ptr(), &mut out) }, RvwStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rvw_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn constants_and_kernel() {
    assert_eq!(rvw_critical_p(1.0), 0.75);
    assert_eq!(rvw_hat_p(1.0), 0.5);
    let mut k = 0.0;
    assert_eq!(unsafe { rvw_covariance_kernel(0.5, 1.0, 0.25, 0.0, &mut k) }, RvwStatus::Ok);
    assert!((k - 2.0 * 0.5f64.powf(0.75)).abs() < 1e-12);
    let mut v = 0.0;
    assert_eq!(unsafe { rvw_subcritical_limit_variance(0.25, 0.0, &mut v) }, RvwStatus::Ok);
    assert!((v - 2.0).abs() < 1e-12);
    assert_eq!(unsafe { rvw_covariance_kernel(0.5, 1.0, 0.9, 0.0, &mut k) }, RvwStatus::InvalidInput);
    assert!(!last_error().is_empty());
    let version = unsafe { CStr::from_ptr(rvw_version()) }.to_str().unwrap();
    assert_eq!(version, rvwalk::TOOL_VERSION);
}

#[test]
fn spec_errors_are_reported() {
    let bad = CString::new(r#"{"family":"power_law","gamma":-3.0}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rvw_memory_spec_from_json(bad.as_ptr(), &mut out) }, RvwStatus::InvalidInput);
    assert!(out.is_null());
    assert!(last_error().contains("gamma"), "{}", last_error());
    assert_eq!(unsafe { rvw_memory_spec_from_json(ptr::null(), &mut out) }, RvwStatus::NullPointer);
    let s = spec(r#"{"family":"power_law","gamma":1.0}"#);
    let mut mu = 0.0;
    assert_eq!(unsafe { rvw_memory_spec_mu(s, 7, &mut mu) }, RvwStatus::Ok);
    assert_eq!(mu, 7.0);
    assert_eq!(unsafe { rvw_memory_spec_mu(s, 0, &mut mu) }, RvwStatus::InvalidInput);
    unsafe { rvw_memory_spec_free(s) };
    unsafe { rvw_memory_spec_free(ptr::null_mut()) };
}

#[test]
fn regime_json() {
    let s = spec(r#"{"family":"power_law","gamma":0.0}"#);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { rvw_regime_json(s, 0.9, &mut text) }, RvwStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(text) }.to_str().unwrap()).unwrap();
    assert_eq!(v["regime"], "Supercritical");
    unsafe {
        rvw_string_free(text);
        rvw_memory_spec_free(s);
    }
}

#[test]
fn sequence_and_moment_columns() {
    let s = spec(r#"{"family":"continued_product","gamma":1.0}"#);
    let mut seq = ptr::null_mut();
    assert_eq!(unsafe { rvw_sequences_build(s, 0.5, 100, &mut seq) }, RvwStatus::Ok);
    assert_eq!(unsafe { rvw_sequences_len(seq) }, 100);
    let mut nu = vec![0.0; 100];
    assert_eq!(unsafe { rvw_sequences_column(seq, RvwSequenceColumn::Nu, nu.as_mut_ptr(), nu.len()) }, RvwStatus::Ok);
    assert!((nu[99] - 5050.0).abs() < 1e-9);
    let mut short = vec![0.0; 10];
    assert_eq!(
        unsafe { rvw_sequences_column(seq, RvwSequenceColumn::Mu, short.as_mut_ptr(), short.len()) },
        RvwStatus::OutOfRange
    );

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rvw_moments_build(s, 0.5, 8, 1, 1.0, &mut m) }, RvwStatus::Ok);
    assert_eq!(unsafe { rvw_moments_len(m) }, 8);
    let mut k = vec![0.0; 8];
    assert_eq!(unsafe { rvw_moments_column(m, RvwMomentColumn::KurtosisM, k.as_mut_ptr(), 8) }, RvwStatus::Ok);
    assert!(k.iter().all(|&x| x > 0.0 && x <= 3.0));

    let mut m2 = ptr::null_mut();
    assert_eq!(unsafe { rvw_moments_build(s, 0.5, 8, 0, 2.0, &mut m2) }, RvwStatus::Ok);
    let mut e = vec![0.0; 8];
    assert_eq!(unsafe { rvw_moments_column(m2, RvwMomentColumn::ESSq, e.as_mut_ptr(), 8) }, RvwStatus::Ok);
    assert_eq!(e[0], 2.0);
    assert_eq!(unsafe { rvw_moments_column(m2, RvwMomentColumn::EY4, e.as_mut_ptr(), 8) }, RvwStatus::InvalidInput);
    unsafe {
        rvw_moments_free(m);
        rvw_moments_free(m2);
        rvw_sequences_free(seq);
        rvw_memory_spec_free(s);
    }
}

#[test]
fn simulation_batches() {
    let s = spec(r#"{"family":"power_law","gamma":0.5}"#);
    let cps = [10u64, 100, 1000];
    let run = |seed| {
        let mut b = ptr::null_mut();
        assert_eq!(
            unsafe { rvw_simulate(s, 0.7, ptr::null(), 1000, cps.as_ptr(), cps.len(), 4, seed, 1, &mut b) },
            RvwStatus::Ok
        );
        assert_eq!(unsafe { rvw_batch_replicas(b) }, 4);
        assert_eq!(unsafe { rvw_batch_checkpoints(b) }, 3);
        let mut rows = Vec::new();
        for r in 0..4 {
            let mut buf = [0.0; 3];
            assert_eq!(unsafe { rvw_batch_s(b, r, buf.as_mut_ptr(), 3) }, RvwStatus::Ok);
            rows.push(buf);
        }
        let mut buf = [0.0; 3];
        assert_eq!(unsafe { rvw_batch_s(b, 4, buf.as_mut_ptr(), 3) }, RvwStatus::OutOfRange);
        unsafe { rvw_batch_free(b) };
        rows
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));

    let normal = CString::new(r#"{"kind":"standard_normal"}"#).unwrap();
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { rvw_simulate(s, 0.7, normal.as_ptr(), 50, ptr::null(), 0, 2, 1, 1, &mut b) }, RvwStatus::Ok);
    let mut last = [0.0];
    assert_eq!(unsafe { rvw_batch_s(b, 0, last.as_mut_ptr(), 1) }, RvwStatus::Ok);
    assert!(last[0].fract() != 0.0);
    unsafe { rvw_batch_free(b) };

    let bad = [5u64, 3];
    assert_eq!(
        unsafe { rvw_simulate(s, 0.7, ptr::null(), 10, bad.as_ptr(), bad.len(), 1, 1, 1, &mut b) },
        RvwStatus::InvalidInput
    );
    unsafe { rvw_memory_spec_free(s) };
}

#[test]
fn sampler_handle() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rvw_sampler_new(3, &mut h) }, RvwStatus::Ok);
    let mut k = 0usize;
    assert_eq!(unsafe { rvw_sampler_sample(h, 0.5, &mut k) }, RvwStatus::InvalidInput);
    for w in [1.0, 2.0, 1.0] {
        assert_eq!(unsafe { rvw_sampler_push(h, w) }, RvwStatus::Ok);
    }
    assert_eq!(unsafe { rvw_sampler_push(h, 1.0) }, RvwStatus::ResourceLimit);
    assert_eq!(unsafe { rvw_sampler_total(h) }, 4.0);
    for (u, want) in [(0.0, 1), (0.24, 1), (0.25, 2), (0.74, 2), (0.75, 3), (0.99, 3)] {
        assert_eq!(unsafe { rvw_sampler_sample(h, u, &mut k) }, RvwStatus::Ok);
        assert_eq!(k, want, "u = {u}");
    }
    assert_eq!(unsafe { rvw_sampler_sample(h, 1.0, &mut k) }, RvwStatus::InvalidInput);
    assert_eq!(unsafe { rvw_sampler_push(ptr::null_mut(), 1.0) }, RvwStatus::NullPointer);
    unsafe { rvw_sampler_free(h) };
}

#[test]
fn verify_suite_as_json() {
    let name = CString::new("oracle-equivalence").unwrap();
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { rvw_verify_json(name.as_ptr(), 1, 1, 1, &mut text) }, RvwStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(text) }.to_str().unwrap()).unwrap();
    assert_eq!(v["verdict"], "pass");
    unsafe { rvw_string_free(text) };
    let unknown = CString::new("nope").unwrap();
    assert_eq!(unsafe { rvw_verify_json(unknown.as_ptr(), 1, 1, 1, &mut text) }, RvwStatus::InvalidInput);
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rvwalk.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["rvw_memory_spec_from_json", "rvw_simulate", "rvw_sampler_sample", "RVW_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
