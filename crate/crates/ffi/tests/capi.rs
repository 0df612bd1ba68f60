use std::ffi::CStr;
use std::f64::consts::PI;
use std::ptr;

use cwlab::quat::{QMat2, Quaternion};
use cwlab::sp2;
use cwlab_ffi::*;

fn v_matrix(t: f64) -> [f64; 16] {
    QMat2::diag(Quaternion::I.scale(t), Quaternion::I.scale(t)).to_array()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cwlab_last_error_message()) }.to_string_lossy().into_owned()
}

struct Handles {
    st: *mut CwlabStructure,
    m: *mut CwlabMetric,
}

impl Handles {
    fn new(s: f64) -> Self {
        let mut st = ptr::null_mut();
        let mut m = ptr::null_mut();
        unsafe {
            assert_eq!(cwlab_structure_new(&mut st), CwlabStatus::Ok);
            assert_eq!(cwlab_metric_new(st, s, &mut m), CwlabStatus::Ok);
        }
        Self { st, m }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            cwlab_metric_free(self.m);
            cwlab_structure_free(self.st);
        }
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(cwlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn structure_lambda_is_four() {
    let h = Handles::new(1.0);
    let mut lambda = 0.0;
    assert_eq!(unsafe { cwlab_structure_lambda(h.st, &mut lambda) }, CwlabStatus::Ok);
    assert!((lambda - 4.0).abs() < 1e-9, "{lambda}");
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(cwlab_structure_new(ptr::null_mut()), CwlabStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut t = 0.0;
        assert_eq!(cwlab_eigenangles(ptr::null(), &mut t, &mut t), CwlabStatus::NullPointer);
        assert_eq!(cwlab_bi_distance(ptr::null(), &mut t), CwlabStatus::NullPointer);
        let mut r = CwlabRank::default();
        assert_eq!(cwlab_orbit_rank(ptr::null(), v_matrix(0.0).as_ptr(), &mut r), CwlabStatus::NullPointer);
        cwlab_structure_free(ptr::null_mut());
        cwlab_metric_free(ptr::null_mut());
    }
}

#[test]
fn invalid_arguments_are_reported() {
    let h = Handles::new(1.0);
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(cwlab_metric_new(h.st, -1.0, &mut m), CwlabStatus::InvalidArgument);
        assert!(m.is_null());
        assert_eq!(cwlab_metric_new(h.st, f64::NAN, &mut m), CwlabStatus::InvalidArgument);

        let mut bad = v_matrix(0.0);
        bad[3] = f64::INFINITY;
        let mut t = 0.0;
        assert_eq!(cwlab_bi_distance(bad.as_ptr(), &mut t), CwlabStatus::InvalidArgument);

        // 2 * Id is not in Sp(2).
        let mut two = [0.0; 16];
        two[0] = 2.0;
        two[12] = 2.0;
        let mut d = CwlabDistance::default();
        assert_eq!(cwlab_shoot_distance(h.m, two.as_ptr(), 4, 1, &mut d), CwlabStatus::InvalidArgument);
        assert!(!last_error().is_empty());

        let mut st = CwlabCkStatistic::default();
        assert_eq!(cwlab_ck_statistic(h.m, v_matrix(1.0).as_ptr(), 0, 1, &mut st), CwlabStatus::InvalidArgument);
    }
}

#[test]
fn exp_eigenangles_and_distance() {
    let t = 2.0 * PI / 3.0;
    let mut g = [0.0; 16];
    let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(cwlab_qmat_exp(v_matrix(t).as_ptr(), g.as_mut_ptr()), CwlabStatus::Ok);
        assert_eq!(cwlab_eigenangles(g.as_ptr(), &mut a, &mut b), CwlabStatus::Ok);
        assert_eq!(cwlab_bi_distance(g.as_ptr(), &mut d), CwlabStatus::Ok);
    }
    assert!((a - t).abs() < 1e-12 && (b - t).abs() < 1e-12, "{a} {b}");
    assert!((d - t).abs() < 1e-12, "{d}");
}

#[test]
fn metric_inner_on_v() {
    let h = Handles::new(1.25);
    let mut c = [0.0; 10];
    let (mut n1, mut dim) = (0.0, 0u32);
    unsafe {
        assert_eq!(cwlab_sp2_coords(v_matrix(1.0).as_ptr(), c.as_mut_ptr()), CwlabStatus::Ok);
        assert_eq!(cwlab_metric_inner(h.m, c.as_ptr(), c.as_ptr(), &mut n1), CwlabStatus::Ok);
        assert_eq!(cwlab_metric_right_algebra_dim(h.m, &mut dim), CwlabStatus::Ok);
    }
    let expected = (2.0 + 1.25) / 3.0 * 4.0 * sp2::v_coords().norm_squared();
    assert!((n1 - expected).abs() < 1e-9 * expected, "{n1} vs {expected}");
    assert_eq!(dim, 6);
}

#[test]
fn ck_statistic_constant_for_v() {
    let h = Handles::new(0.9);
    let mut st = CwlabCkStatistic::default();
    assert_eq!(unsafe { cwlab_ck_statistic(h.m, v_matrix(1.0).as_ptr(), 200, 7, &mut st) }, CwlabStatus::Ok);
    assert_eq!(st.sample_count, 200);
    assert!(st.relative_spread < 1e-9, "{}", st.relative_spread);
}

#[test]
fn orbit_rank_at_identity_is_eight() {
    let h = Handles::new(1.1);
    let mut r = CwlabRank::default();
    let id = QMat2::identity().to_array();
    assert_eq!(unsafe { cwlab_orbit_rank(h.m, id.as_ptr(), &mut r) }, CwlabStatus::Ok);
    assert_eq!(r.rank, 8);
    assert!(r.gap > 1e4);
}

#[test]
fn shooting_recovers_bi_invariant_distance() {
    let h = Handles::new(1.0);
    let mut g = [0.0; 16];
    let mut d = CwlabDistance::default();
    unsafe {
        assert_eq!(cwlab_qmat_exp(v_matrix(PI / 3.0).as_ptr(), g.as_mut_ptr()), CwlabStatus::Ok);
        assert_eq!(cwlab_shoot_distance(h.m, g.as_ptr(), 4, 3, &mut d), CwlabStatus::Ok);
    }
    assert!(d.converged);
    assert!((d.length_normalized - PI / 3.0).abs() < 1e-6, "{}", d.length_normalized);
    assert!((d.length - 2.0 * d.length_normalized).abs() < 1e-12);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cwlab.h")).unwrap();
    for name in [
        "cwlab_version",
        "cwlab_last_error_message",
        "cwlab_structure_new",
        "cwlab_structure_free",
        "cwlab_metric_new",
        "cwlab_metric_free",
        "cwlab_eigenangles",
        "cwlab_bi_distance",
        "cwlab_ck_statistic",
        "cwlab_shoot_distance",
        "cwlab_orbit_rank",
        "CWLAB_STATUS_NOT_CONVERGED",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempdir();
    let src = dir.join("probe.c");
    std::fs::write(&src, "#include \"cwlab.h\"\nint main(void) { CwlabStatus s = CWLAB_STATUS_OK; return (int)s; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("cwlab-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
