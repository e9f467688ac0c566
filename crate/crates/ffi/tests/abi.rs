use std::ffi::CStr;
use std::ptr;

use rglab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rglab_last_error()) }.to_string_lossy().into_owned()
}

fn fixture() -> *mut RglabModel {
    let c = [0.5, 0.25, 0.25, 0.375];
    let p = [1.0 / 3.0, 2.0 / 3.0];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rglab_model_sbm(2, c.as_ptr(), p.as_ptr(), &mut m) }, RglabStatus::Ok);
    m
}

#[test]
fn limit_eigenvalues_of_fixture() {
    let m = fixture();
    let mut l = [0.0; 2];
    assert_eq!(unsafe { rglab_limit_eigenvalues(m, RglabShift::Adjacency, 2, l.as_mut_ptr()) }, RglabStatus::Ok);
    assert!((l[0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((l[1] - 1.0 / 12.0).abs() < 1e-12);
    unsafe { rglab_model_free(m) };
}

#[test]
fn sample_copy_and_decompose() {
    let m = fixture();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { rglab_graph_sample(m, 40, 1.0, 3, &mut g) }, RglabStatus::Ok);
    let (mut n, mut e) = (0usize, 0usize);
    assert_eq!(unsafe { rglab_graph_size(g, &mut n, &mut e) }, RglabStatus::Ok);
    assert_eq!(n, 40);

    let mut s = vec![0.0; n * n];
    assert_eq!(unsafe { rglab_graph_shift(g, RglabShift::Adjacency, s.as_mut_ptr(), s.len()) }, RglabStatus::Ok);
    let ones = s.iter().filter(|&&v| v != 0.0).count();
    assert_eq!(ones, 2 * e);
    assert!(s.iter().all(|&v| v == 0.0 || (v - 1.0 / 40.0).abs() < 1e-15));

    let q = 2;
    let mut vals = vec![0.0; q];
    let mut vecs = vec![0.0; n * q];
    assert_eq!(
        unsafe { rglab_graph_eigenpairs(g, RglabShift::Adjacency, q, vals.as_mut_ptr(), vecs.as_mut_ptr()) },
        RglabStatus::Ok
    );
    // S u = λ u, checked with the copied matrix
    for i in 0..q {
        let resid = (0..n)
            .map(|r| (0..n).map(|c| s[r * n + c] * vecs[c * q + i]).sum::<f64>() - vals[i] * vecs[r * q + i])
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(resid < 1e-12, "residual {resid}");
    }
    unsafe {
        rglab_graph_free(g);
        rglab_model_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rglab_model_gaussian(-1.0, &mut m) }, RglabStatus::InvalidModel);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let bad_c = [0.5, 0.1, 0.2, 0.5];
    let p = [0.5, 0.5];
    assert_ne!(unsafe { rglab_model_sbm(2, bad_c.as_ptr(), p.as_ptr(), &mut m) }, RglabStatus::Ok);

    let mut out = [0.0; 1];
    assert_eq!(
        unsafe { rglab_limit_eigenvalues(ptr::null(), RglabShift::Adjacency, 1, out.as_mut_ptr()) },
        RglabStatus::NullPointer
    );
    assert_eq!(last_error(), "model is null");

    let model = fixture();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { rglab_graph_sample(model, 10, 1.0, 0, &mut g) }, RglabStatus::Ok);
    let mut small = [0.0; 4];
    assert_eq!(unsafe { rglab_graph_shift(g, RglabShift::Laplacian, small.as_mut_ptr(), 4) }, RglabStatus::Shape);
    unsafe {
        rglab_graph_free(g);
        rglab_model_free(model);
        rglab_graph_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rglab.h")).unwrap();
    for name in [
        "rglab_last_error",
        "rglab_model_sbm",
        "rglab_model_gaussian",
        "rglab_model_free",
        "rglab_limit_eigenvalues",
        "rglab_graph_sample",
        "rglab_graph_size",
        "rglab_graph_shift",
        "rglab_graph_eigenpairs",
        "rglab_graph_free",
        "rglab_version",
        "RGLAB_STATUS_OK",
        "typedef struct RglabModel RglabModel",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(rglab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
