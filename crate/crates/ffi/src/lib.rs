//! C ABI over the `cwlab` library.
//!
//! Quaternionic 2x2 matrices cross the boundary as 16 doubles, row-major by
//! entry and `(re, i, j, k)` within an entry. sp(2) coordinate vectors are 10
//! doubles in the orthonormal half-trace basis. Every fallible call returns a
//! [`CwlabStatus`]; the message of the last failure on the calling thread is
//! available from [`cwlab_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cwlab::ck::ck_statistic_sp2;
use cwlab::geodesy::{bi_distance_oracle, shoot_distance, ShootParams};
use cwlab::linalg::Subspace;
use cwlab::metric::{build_metric, centralizer_of_v, isometric_right_algebra, orbit_rank_at, MetricGram};
use cwlab::quat::{eigenangles, qmat_exp, QMat2};
use cwlab::rng::RngHandle;
use cwlab::so7::Structure;
use cwlab::sp2::{self, Vec10};
use cwlab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CwlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    NotConverged = 4,
    Panic = 5,
}

/// so(7) structure: G2, the adapted Cartan, roots, sp(2) and Phi.
pub struct CwlabStructure {
    inner: Structure,
}

/// Left-invariant metric `G_s` together with its isometric right algebra
/// and the centralizer of `v`.
pub struct CwlabMetric {
    metric: MetricGram,
    ks: Subspace,
    c: Subspace,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CwlabCkStatistic {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub relative_spread: f64,
    pub sample_count: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CwlabDistance {
    /// Gram units.
    pub length: f64,
    /// Half-trace-normalized units.
    pub length_normalized: f64,
    pub endpoint_defect: f64,
    pub restarts_used: u64,
    pub converged: bool,
    pub saturated: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CwlabRank {
    pub rank: u32,
    pub gap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CwlabStatus {
    match e {
        Error::NotConverged(_) => CwlabStatus::NotConverged,
        Error::InvalidArgument(_) | Error::Config(_) => CwlabStatus::InvalidArgument,
        _ => CwlabStatus::NumericalFailure,
    }
}

fn fail(status: CwlabStatus, msg: &str) -> CwlabStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), CwlabStatus>) -> CwlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CwlabStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CwlabStatus::Panic, &msg)
        }
    }
}

fn lift<T>(r: cwlab::Result<T>) -> Result<T, CwlabStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), CwlabStatus> {
    if p.is_null() {
        Err(fail(CwlabStatus::NullPointer, &format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_qmat(p: *const f64, name: &str) -> Result<QMat2, CwlabStatus> {
    non_null(p, name)?;
    let mut a = [0.0; 16];
    ptr::copy_nonoverlapping(p, a.as_mut_ptr(), 16);
    if a.iter().any(|x| !x.is_finite()) {
        return Err(fail(CwlabStatus::InvalidArgument, &format!("{name} has non-finite entries")));
    }
    Ok(QMat2::from_array(&a))
}

unsafe fn read_vec10(p: *const f64, name: &str) -> Result<Vec10, CwlabStatus> {
    non_null(p, name)?;
    let mut v = Vec10::zeros();
    ptr::copy_nonoverlapping(p, v.as_mut_ptr(), 10);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(fail(CwlabStatus::InvalidArgument, &format!("{name} has non-finite entries")));
    }
    Ok(v)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cwlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty when none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cwlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds the so(7) structure.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_structure_new(out: *mut *mut CwlabStructure) -> CwlabStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = lift(Structure::build())?;
        *out = Box::into_raw(Box::new(CwlabStructure { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or come from [`cwlab_structure_new`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn cwlab_structure_free(p: *mut CwlabStructure) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Scalar `lambda` with `<Phi x, Phi y> = lambda <x, y>`.
///
/// # Safety
/// `p` must be a live structure handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_structure_lambda(p: *const CwlabStructure, out: *mut f64) -> CwlabStatus {
    guard(|| {
        non_null(p, "structure")?;
        non_null(out, "out")?;
        *out = (*p).inner.phi.lambda;
        Ok(())
    })
}

/// Builds `G_s` for `s > 0`.
///
/// # Safety
/// `structure` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_metric_new(
    structure: *const CwlabStructure,
    s: f64,
    out: *mut *mut CwlabMetric,
) -> CwlabStatus {
    guard(|| {
        non_null(structure, "structure")?;
        non_null(out, "out")?;
        if !(s.is_finite() && s > 0.0) {
            return Err(fail(CwlabStatus::InvalidArgument, &format!("s must be positive, got {s}")));
        }
        let metric = lift(build_metric(s, &(*structure).inner))?;
        let (ks, _) = lift(isometric_right_algebra(&metric))?;
        let (c, _) = centralizer_of_v();
        *out = Box::into_raw(Box::new(CwlabMetric { metric, ks, c }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or come from [`cwlab_metric_new`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn cwlab_metric_free(p: *mut CwlabMetric) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `<u, w>_s` on sp(2) coordinates (10 doubles each).
///
/// # Safety
/// `m` must be a live handle, `u` and `w` readable for 10 doubles, `out`
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_metric_inner(
    m: *const CwlabMetric,
    u: *const f64,
    w: *const f64,
    out: *mut f64,
) -> CwlabStatus {
    guard(|| {
        non_null(m, "metric")?;
        non_null(out, "out")?;
        let u = read_vec10(u, "u")?;
        let w = read_vec10(w, "w")?;
        *out = (*m).metric.inner(&u, &w);
        Ok(())
    })
}

/// Dimension of the isometric right algebra `k_s`.
///
/// # Safety
/// `m` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_metric_right_algebra_dim(m: *const CwlabMetric, out: *mut u32) -> CwlabStatus {
    guard(|| {
        non_null(m, "metric")?;
        non_null(out, "out")?;
        *out = (*m).ks.dim() as u32;
        Ok(())
    })
}

/// sp(2) matrix (16 doubles) to its 10 coordinates.
///
/// # Safety
/// `u` readable for 16 doubles, `out` writable for 10.
#[no_mangle]
pub unsafe extern "C" fn cwlab_sp2_coords(u: *const f64, out: *mut f64) -> CwlabStatus {
    guard(|| {
        let u = read_qmat(u, "u")?;
        non_null(out, "out")?;
        let c = sp2::to_coords(&u);
        ptr::copy_nonoverlapping(c.as_ptr(), out, 10);
        Ok(())
    })
}

/// Group exponential of an sp(2) matrix.
///
/// # Safety
/// `u` readable for 16 doubles, `out` writable for 16.
#[no_mangle]
pub unsafe extern "C" fn cwlab_qmat_exp(u: *const f64, out: *mut f64) -> CwlabStatus {
    guard(|| {
        let u = read_qmat(u, "u")?;
        non_null(out, "out")?;
        let g = lift(qmat_exp(&u))?;
        ptr::copy_nonoverlapping(g.to_array().as_ptr(), out, 16);
        Ok(())
    })
}

/// Eigenangles `0 <= theta1 <= theta2 <= pi` of an Sp(2) element.
///
/// # Safety
/// `g` readable for 16 doubles; `theta1`, `theta2` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cwlab_eigenangles(g: *const f64, theta1: *mut f64, theta2: *mut f64) -> CwlabStatus {
    guard(|| {
        let g = read_qmat(g, "g")?;
        non_null(theta1, "theta1")?;
        non_null(theta2, "theta2")?;
        let (a, b) = lift(eigenangles(&g))?;
        *theta1 = a;
        *theta2 = b;
        Ok(())
    })
}

/// Bi-invariant distance from the identity, half-trace-normalized.
///
/// # Safety
/// `g` readable for 16 doubles, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_bi_distance(g: *const f64, out: *mut f64) -> CwlabStatus {
    guard(|| {
        let g = read_qmat(g, "g")?;
        non_null(out, "out")?;
        *out = lift(bi_distance_oracle(&g))?;
        Ok(())
    })
}

/// Statistic `|Ad(g) v|_s^2` over `samples` random `g`.
///
/// # Safety
/// `m` must be a live handle, `v` readable for 16 doubles, `out` valid for
/// a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_ck_statistic(
    m: *const CwlabMetric,
    v: *const f64,
    samples: u64,
    seed: u64,
    out: *mut CwlabCkStatistic,
) -> CwlabStatus {
    guard(|| {
        non_null(m, "metric")?;
        non_null(out, "out")?;
        let v = read_qmat(v, "v")?;
        if samples == 0 {
            return Err(fail(CwlabStatus::InvalidArgument, "samples must be at least 1"));
        }
        let st = lift(ck_statistic_sp2(&(*m).metric, &v, samples as usize, &RngHandle::new(seed)))?;
        *out = CwlabCkStatistic {
            mean: st.mean,
            min: st.min,
            max: st.max,
            relative_spread: st.relative_spread,
            sample_count: st.sample_count as u64,
        };
        Ok(())
    })
}

/// Shooting estimate of `d_s(e, target)`. Returns `NOT_CONVERGED` (with
/// `out` still filled) when no restart met the endpoint tolerance.
///
/// # Safety
/// `m` must be a live handle, `target` readable for 16 doubles, `out` valid
/// for a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_shoot_distance(
    m: *const CwlabMetric,
    target: *const f64,
    restarts: u64,
    seed: u64,
    out: *mut CwlabDistance,
) -> CwlabStatus {
    guard(|| {
        non_null(m, "metric")?;
        non_null(out, "out")?;
        let target = read_qmat(target, "target")?;
        let params = ShootParams { restarts: restarts as usize, ..ShootParams::default() };
        let d = lift(shoot_distance(&target, &(*m).metric, &params, &RngHandle::new(seed), &[]))?;
        *out = CwlabDistance {
            length: d.length,
            length_normalized: d.length_normalized,
            endpoint_defect: d.endpoint_defect,
            restarts_used: d.restarts_used as u64,
            converged: d.converged,
            saturated: d.saturated,
        };
        if d.converged {
            Ok(())
        } else {
            Err(fail(CwlabStatus::NotConverged, "no restart reached the endpoint tolerance"))
        }
    })
}

/// Rank of the orbit of `C x K_s` through `g`.
///
/// # Safety
/// `m` must be a live handle, `g` readable for 16 doubles, `out` valid for
/// a write.
#[no_mangle]
pub unsafe extern "C" fn cwlab_orbit_rank(m: *const CwlabMetric, g: *const f64, out: *mut CwlabRank) -> CwlabStatus {
    guard(|| {
        non_null(m, "metric")?;
        non_null(out, "out")?;
        let g = read_qmat(g, "g")?;
        let m = &*m;
        let r = orbit_rank_at(&g, &m.c, &m.ks);
        *out = CwlabRank { rank: r.rank as u32, gap: r.gap };
        Ok(())
    })
}
