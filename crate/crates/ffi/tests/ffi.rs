use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use sonc_ffi::*;

const THREE_VAR: &str = "2.723 + 3.932*x2^8 + 6.054*x1^2 + 1.963*x1^4*x2^2 - 1.204*x0*x1*x2^3 \
    + 1.462*x0*x1^2*x2 + 1.766*x0*x1^2*x2^2 + 0.841*x0*x1^2*x2^4 - 0.329*x0^2*x1*x2^2 \
    + 7.57*x0^2*x1^2*x2^4 + 2.428*x0^4*x2^2";

fn parse(text: &str) -> *mut SoncPolynomial {
    let c = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sonc_polynomial_parse(c.as_ptr(), &mut p) }, SONC_OK);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let e = sonc_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn motzkin_bounds_through_every_method() {
    let p = parse("x0^4*x1^2 + x0^2*x1^4 - 3*x0^2*x1^2 + 1");
    for method in [SONC_METHOD_SONC, SONC_METHOD_SAGE, SONC_METHOD_FORK, SONC_METHOD_BNB] {
        let opts = SoncBoundOptions { method, ..sonc_bound_options_default() };
        let mut r = SoncBoundResult { lower_bound: 0.0, best_value: 0.0, status: -1, nodes_expanded: 0 };
        assert_eq!(unsafe { sonc_lower_bound(p, &opts, &mut r) }, SONC_OK);
        assert_eq!(r.status, SONC_STATUS_OPTIMAL);
        assert!(r.lower_bound.abs() < 1e-6, "method {method}: {}", r.lower_bound);
    }
    unsafe { sonc_polynomial_free(p) };
}

#[test]
fn handle_queries_and_evaluation() {
    let p = parse("x0^4 + x0^3 - x0 + 1");
    let (mut n, mut t) = (0usize, 0usize);
    unsafe {
        assert_eq!(sonc_polynomial_nvars(p, &mut n), SONC_OK);
        assert_eq!(sonc_polynomial_num_terms(p, &mut t), SONC_OK);
    }
    assert_eq!((n, t), (1, 4));
    let mut v = 0.0;
    assert_eq!(unsafe { sonc_polynomial_eval(p, [2.0].as_ptr(), 1, &mut v) }, SONC_OK);
    assert_eq!(v, 23.0);
    assert_eq!(unsafe { sonc_polynomial_eval(p, [2.0, 1.0].as_ptr(), 2, &mut v) }, SONC_ERR_DIMENSION);

    let mut x = [0.0];
    assert_eq!(unsafe { sonc_local_min(p, x.as_mut_ptr(), 1, &mut v) }, SONC_OK);
    assert!((v - 0.682).abs() < 1e-3);

    let mut len = 0;
    assert_eq!(unsafe { sonc_polynomial_to_string(p, ptr::null_mut(), 0, &mut len) }, SONC_ERR_BUFFER);
    let mut buf = vec![0 as std::ffi::c_char; len + 1];
    assert_eq!(unsafe { sonc_polynomial_to_string(p, buf.as_mut_ptr(), buf.len(), &mut len) }, SONC_OK);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "x0^4 + x0^3 - x0 + 1");
    unsafe { sonc_polynomial_free(p) };
}

#[test]
fn minimal_orthants_of_the_three_variable_example() {
    let p = parse(THREE_VAR);
    let mut count = 0;
    assert_eq!(unsafe { sonc_minimal_orthants(p, ptr::null_mut(), 0, &mut count) }, SONC_ERR_BUFFER);
    assert_eq!(count, 3);
    let mut signs = vec![0i8; 9];
    assert_eq!(unsafe { sonc_minimal_orthants(p, signs.as_mut_ptr(), signs.len(), &mut count) }, SONC_OK);
    assert_eq!(signs, [-1, 1, 1, -1, 1, -1, -1, -1, 1]);
    unsafe { sonc_polynomial_free(p) };
}

#[test]
fn errors_are_reported_not_thrown() {
    let bad = CString::new("x0^^2").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sonc_polynomial_parse(bad.as_ptr(), &mut p) }, SONC_ERR_PARSE);
    assert!(p.is_null());
    assert!(last_error().contains("exponent"));

    assert_eq!(unsafe { sonc_polynomial_parse(ptr::null(), &mut p) }, SONC_ERR_NULL);
    let mut n = 0;
    assert_eq!(unsafe { sonc_polynomial_nvars(ptr::null(), &mut n) }, SONC_ERR_NULL);

    let q = parse("x0^2 + 1");
    let opts = SoncBoundOptions { method: 42, ..sonc_bound_options_default() };
    let mut r = SoncBoundResult { lower_bound: 0.0, best_value: 0.0, status: 0, nodes_expanded: 0 };
    assert_eq!(unsafe { sonc_lower_bound(q, &opts, &mut r) }, SONC_ERR_INVALID);
    assert!(last_error().contains("unknown method"));
    unsafe {
        sonc_polynomial_free(q);
        sonc_polynomial_free(ptr::null_mut());
    }
}

#[test]
fn unbounded_polynomial_gives_minus_infinity() {
    let p = parse("x0^3 + 1");
    let mut r = SoncBoundResult { lower_bound: 0.0, best_value: 0.0, status: 0, nodes_expanded: 0 };
    assert_eq!(unsafe { sonc_lower_bound(p, ptr::null(), &mut r) }, SONC_OK);
    assert_eq!(r.lower_bound, f64::NEG_INFINITY);
    unsafe { sonc_polynomial_free(p) };
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(sonc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sonc.h");
    let text = std::fs::read_to_string(&header).expect("header generated by the build script");
    for name in ["sonc_polynomial_parse", "sonc_lower_bound", "sonc_minimal_orthants", "sonc_last_error", "SoncBoundOptions"] {
        assert!(text.contains(name), "{name} missing from the header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"sonc.h\"\nint main(void) {\n  SoncBoundOptions o = sonc_bound_options_default();\n  \
         SoncPolynomial *p = 0;\n  (void)o;\n  return sonc_polynomial_parse(\"x0^2 + 1\", &p);\n}\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found; header syntax not checked");
        return;
    };
    assert!(status.success(), "header failed to compile");
}
