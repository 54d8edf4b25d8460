use std::ffi::{CStr, CString};
use std::ptr;

use percept_mc_ffi::*;

const HE: &str = "0,1,2\n4748,2139,148\n91,2010,0\n744,211,1017\n";
const CHAIN: &str = "dtmc
const int N;
module m
  s : [0..N] init 0;
  [] s<N -> 1/5: (s'=N) + 4/5: (s'=s+1);
  [] s=N -> true;
endmodule";

fn last_error() -> String {
    unsafe { CStr::from_ptr(pmc_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn abstraction_roundtrip() {
    let csv = CString::new(HE).unwrap();
    let mut a = ptr::null_mut();
    unsafe {
        assert_eq!(pmc_abstraction_from_csv(csv.as_ptr(), &mut a), PmcStatus::Ok);
        let mut k = 0usize;
        assert_eq!(pmc_abstraction_num_labels(a, &mut k), PmcStatus::Ok);
        assert_eq!(k, 3);
        let mut p = 0.0;
        assert_eq!(pmc_abstraction_prob(a, 0, 0, &mut p), PmcStatus::Ok);
        assert!((p - 4748.0 / 7035.0).abs() < 1e-15);
        assert_eq!(pmc_abstraction_prob(a, 3, 0, &mut p), PmcStatus::OutOfRange);
        assert!(last_error().contains("outside"));
        pmc_abstraction_free(a);
    }
}

#[test]
fn bad_matrix_reports_error() {
    let csv = CString::new("0,1\n1,x\n2,3\n").unwrap();
    let mut a = ptr::null_mut();
    let status = unsafe { pmc_abstraction_from_csv(csv.as_ptr(), &mut a) };
    assert_eq!(status, PmcStatus::AbstractionError);
    assert!(a.is_null());
    assert!(last_error().contains("not an integer"), "{}", last_error());
}

#[test]
fn model_check_and_simulate() {
    let src = CString::new(CHAIN).unwrap();
    let binds = CString::new("N=3").unwrap();
    let prop = CString::new("P=? [ F s=3 ]").unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(pmc_model_from_source(src.as_ptr(), binds.as_ptr(), &mut m), PmcStatus::Ok);
        let mut n = 0usize;
        assert_eq!(pmc_model_num_states(m, &mut n), PmcStatus::Ok);
        assert_eq!(n, 4);
        let mut p = 0.0;
        assert_eq!(pmc_model_check(m, prop.as_ptr(), &mut p), PmcStatus::Ok);
        assert!((p - 1.0).abs() < 1e-12);
        let bounded = CString::new("P=? [ F<=2 s=3 ]").unwrap();
        assert_eq!(pmc_model_check(m, bounded.as_ptr(), &mut p), PmcStatus::Ok);
        assert!((p - 0.36).abs() < 1e-12);
        let (mut mean, mut se) = (0.0, 0.0);
        assert_eq!(pmc_model_simulate(m, prop.as_ptr(), 1000, 1, &mut mean, &mut se), PmcStatus::Ok);
        assert_eq!((mean, se), (1.0, 0.0));
        let bad = CString::new("P=? [ F t=1 ]").unwrap();
        assert_eq!(pmc_model_check(m, bad.as_ptr(), &mut p), PmcStatus::CheckError);
        pmc_model_free(m);
    }
}

#[test]
fn unbound_constant_and_nulls() {
    let src = CString::new(CHAIN).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(pmc_model_from_source(src.as_ptr(), ptr::null(), &mut m), PmcStatus::ModelError);
        assert!(last_error().contains('N'));
        assert_eq!(pmc_model_from_source(ptr::null(), ptr::null(), &mut m), PmcStatus::NullPointer);
        assert_eq!(pmc_model_num_states(ptr::null(), ptr::null_mut()), PmcStatus::NullPointer);
        pmc_model_free(ptr::null_mut());
    }
}

#[test]
fn beta_and_version() {
    let mut b = 0.0;
    unsafe {
        assert_eq!(pmc_beta(9125, 11108, &mut b), PmcStatus::Ok);
        assert!((b - 0.8215).abs() < 5e-4);
        assert_eq!(pmc_beta(5, 4, &mut b), PmcStatus::AbstractionError);
        let v = CStr::from_ptr(pmc_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/percept_mc.h");
    assert!(std::path::Path::new(header).exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ return PMC_STATUS_OK; }}\n")).unwrap();
    match std::process::Command::new("cc").arg("-fsyntax-only").arg(&src).status() {
        Ok(s) => assert!(s.success()),
        Err(_) => eprintln!("no C compiler; header syntax not checked"),
    }
}
