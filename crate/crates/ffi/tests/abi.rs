use std::ffi::{CStr, CString};
use std::ptr;

use sidlab_ffi::*;

fn landscape(preset: &str, dim: usize) -> *mut SidLandscape {
    let name = CString::new(preset).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sid_landscape_new(name.as_ptr(), dim, &mut h) }, SidStatus::Ok);
    assert!(!h.is_null());
    h
}

fn domain(json: &str) -> *mut SidDomain {
    let js = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sid_domain_from_json(js.as_ptr(), &mut h) }, SidStatus::Ok);
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sid_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn landscape_lifecycle_and_eval() {
    let h = landscape("dw", 1);
    assert_eq!(unsafe { sid_landscape_dim(h) }, 1);
    let (mut v, mut g) = (0.0, [0.0]);
    assert_eq!(unsafe { sid_potential_eval(h, [0.0].as_ptr(), 1, &mut v, g.as_mut_ptr()) }, SidStatus::Ok);
    assert!((v - 0.25).abs() < 1e-15 && g[0].abs() < 1e-15);
    unsafe { sid_landscape_free(h) };
    unsafe { sid_landscape_free(ptr::null_mut()) };
}

#[test]
fn error_codes_and_messages() {
    let name = CString::new("no-such-preset").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sid_landscape_new(name.as_ptr(), 1, &mut h) }, SidStatus::UnknownPreset);
    assert!(h.is_null());
    assert!(last_error().contains("no-such-preset"));

    assert_eq!(unsafe { sid_landscape_new(ptr::null(), 1, &mut h) }, SidStatus::NullPointer);

    let l = landscape("ou", 2);
    let (mut v, mut g) = (0.0, [0.0; 3]);
    assert_eq!(
        unsafe { sid_potential_eval(l, [0.0; 3].as_ptr(), 3, &mut v, g.as_mut_ptr()) },
        SidStatus::DimensionMismatch
    );
    unsafe { sid_landscape_free(l) };

    let bad = CString::new("{\"kind\":\"ball\"}").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { sid_domain_from_json(bad.as_ptr(), &mut d) }, SidStatus::Config);

    let ok = landscape("ou", 1);
    assert_eq!(last_error(), "");
    unsafe { sid_landscape_free(ok) };
}

#[test]
fn domain_and_barrier() {
    let l = landscape("quad-attract(1)", 1);
    let d = domain(r#"{"kind":"interval","lo":-1.0,"hi":1.0}"#);
    let mut inside = false;
    assert_eq!(unsafe { sid_domain_contains(d, [0.5].as_ptr(), 1, &mut inside) }, SidStatus::Ok);
    assert!(inside);
    let (mut h, mut z) = (0.0, [0.0]);
    assert_eq!(unsafe { sid_compute_barrier(l, d, [0.0].as_ptr(), 1, 16, 0, &mut h, z.as_mut_ptr()) }, SidStatus::Ok);
    assert!((h - 1.0).abs() < 1e-10);
    assert_eq!(z[0].abs(), 1.0);
    unsafe {
        sid_domain_free(d);
        sid_landscape_free(l);
    }
}

#[test]
fn simulate_and_bvp() {
    let l = landscape("ou", 1);
    let d = domain(r#"{"kind":"interval","lo":-1.0,"hi":1.0}"#);
    let mut rec = SidExitRecord::default();
    let mut z = [0.0];
    let st = unsafe { sid_simulate_exit(l, d, [0.0].as_ptr(), 1, 1.0, 1e-3, 100.0, 7, &mut rec, z.as_mut_ptr()) };
    assert_eq!(st, SidStatus::Ok);
    assert!(!rec.censored && rec.exit_time > 0.0);
    assert!((z[0].abs() - 1.0).abs() < 1e-12);

    let mut again = SidExitRecord::default();
    unsafe { sid_simulate_exit(l, d, [0.0].as_ptr(), 1, 1.0, 1e-3, 100.0, 7, &mut again, ptr::null_mut()) };
    assert_eq!(again.exit_time, rec.exit_time);

    let mut u = 0.0;
    assert_eq!(unsafe { sid_bvp_mean_exit(l, -1.0, 1.0, 1.0, 1024, 0.0, &mut u) }, SidStatus::Ok);
    assert!(u > 1.0 && u < 2.0);
    unsafe {
        sid_domain_free(d);
        sid_landscape_free(l);
    }
}

#[test]
fn action_value() {
    let l = landscape("ou", 1);
    let mut v = 0.0;
    assert_eq!(unsafe { sid_minimize_action(l, [0.0].as_ptr(), [1.0].as_ptr(), 1, 0.01, &mut v) }, SidStatus::Ok);
    assert!((v - 0.5).abs() < 0.01, "{v}");
    unsafe { sid_landscape_free(l) };
}

#[test]
fn campaign_returns_summary_json() {
    let cfg = CString::new(
        r#"{"landscape":"ou","domain":{"kind":"interval","lo":-1.0,"hi":1.0},
            "init":{"x0":[0.0]},"sigma_grid":[1.0],"trajectories_per_sigma":4,
            "dt":0.001,"master_seed":3}"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { sid_run_campaign(cfg.as_ptr(), &mut out) };
    assert_eq!(st, SidStatus::Ok, "{}", last_error());
    let s = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { sid_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["stats"][0]["count"], 4);
    assert_eq!(v["barrier"], 0.5);
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(sid_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_entry_points() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sidlab.h")).unwrap();
    for name in ["sid_landscape_new", "sid_run_campaign", "sid_string_free", "SID_STATUS_OK", "SidExitRecord"] {
        assert!(h.contains(name), "missing {name}");
    }
}
