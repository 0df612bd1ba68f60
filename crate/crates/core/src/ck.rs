//! Monte-Carlo constancy tests for Killing fields of constant length.
//!
//! A right-invariant field generated by `v` is Killing for a left-invariant
//! metric when `Ad(G)` fixes it up to isometry, and has constant length
//! exactly when `g -> |Ad(g) v|^2` is constant. Each statistic below samples
//! that function (or its projected analogue on a homogeneous space).

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricGram;
use crate::quat::{is_sp2_algebra, qmat_exp, QMat2};
use crate::report::VerificationReport;
use crate::rng::RngHandle;
use crate::so7::{self, Mat7, Structure};
use crate::sp2;

/// Relative spread below which a field is accepted as constant-length.
pub const ACCEPT_SPREAD: f64 = 1e-9;
/// Relative spread above which a field is rejected.
pub const REJECT_SPREAD: f64 = 1e-3;
/// Fewer samples than this make any verdict inconclusive.
pub const MIN_SAMPLES: usize = 100;

pub const SO7_FACTORS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CkStatistic {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub relative_spread: f64,
    pub sample_count: usize,
    pub seed: u64,
}

/// Sum in a fixed binary tree so the result does not depend on scheduling.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => x[0],
        n => pairwise_sum(&x[..n / 2]) + pairwise_sum(&x[n / 2..]),
    }
}

impl CkStatistic {
    pub fn from_values(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        let mean = if n == 0 { 0.0 } else { pairwise_sum(values) / n as f64 };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (min, max) = if n == 0 { (0.0, 0.0) } else { (min, max) };
        let relative_spread = if max == min {
            0.0
        } else if mean.abs() > 0.0 {
            (max - min) / mean.abs()
        } else {
            f64::INFINITY
        };
        Self { mean, min, max, relative_spread, sample_count: n, seed }
    }

    pub fn verdict(&self) -> Verdict {
        Verdict::classify(self.relative_spread, self.sample_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Constant,
    NonConstant,
    Inconclusive,
}

impl Verdict {
    pub fn classify(spread: f64, samples: usize) -> Self {
        if samples < MIN_SAMPLES {
            Verdict::Inconclusive
        } else if spread < ACCEPT_SPREAD {
            Verdict::Constant
        } else if spread > REJECT_SPREAD {
            Verdict::NonConstant
        } else {
            Verdict::Inconclusive
        }
    }
}

fn sample_values<F>(samples: usize, rng: &RngHandle, f: F) -> Result<Vec<f64>>
where
    F: Fn(&RngHandle) -> Result<f64> + Sync,
{
    (0..samples as u64).into_par_iter().map(|i| f(&rng.split(i))).collect()
}

pub fn ck_statistic_sp2(metric: &MetricGram, v: &QMat2, samples: usize, rng: &RngHandle) -> Result<CkStatistic> {
    if !is_sp2_algebra(v, 1e-12) {
        return Err(Error::InvalidArgument("CK generator is not in sp(2)".into()));
    }
    let values = sample_values(samples, rng, |r| {
        let g = sp2::random_sp2(r);
        let w = g * *v * g.sp2_inverse();
        Ok(metric.norm_sq(&sp2::to_coords(&w)))
    })?;
    Ok(CkStatistic::from_values(&values, rng.seed))
}

/// Product of `SO7_FACTORS` exponentials of standard Gaussian so(7) elements.
pub fn random_so7(rng: &RngHandle) -> Mat7 {
    let mut r = rng.rng();
    let mut g = Mat7::identity();
    for _ in 0..SO7_FACTORS {
        let x = DVector::from_fn(so7::DIM, |_, _| r.sample::<f64, _>(StandardNormal));
        g *= so7::to_matrix(&x).exp();
    }
    g
}

pub fn ck_statistic_s7(structure: &Structure, v: &DVector<f64>, samples: usize, rng: &RngHandle) -> Result<CkStatistic> {
    let values = sample_values(samples, rng, |r| {
        let w = so7::conjugate(&random_so7(r), v);
        Ok(structure.project_m(&w).norm_squared())
    })?;
    Ok(CkStatistic::from_values(&values, rng.seed))
}

/// `|pr_h x|^2 + s |pr_m x|^2`.
pub fn deformed_norm_sq(structure: &Structure, x: &DVector<f64>, s: f64) -> f64 {
    let h = structure.project_h(x);
    let m = x - &h;
    h.norm_squared() + s * m.norm_squared()
}

pub fn ck_statistic_so7_deformed(
    structure: &Structure,
    v: &DVector<f64>,
    s: f64,
    samples: usize,
    rng: &RngHandle,
) -> Result<CkStatistic> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("deformation parameter must be positive, got {s}")));
    }
    let values = sample_values(samples, rng, |r| {
        let w = so7::conjugate(&random_so7(r), v);
        Ok(deformed_norm_sq(structure, &w, s))
    })?;
    Ok(CkStatistic::from_values(&values, rng.seed))
}

/// Compares the deformed so(7) statistic along `exp(Phi X)` with the sp(2)
/// statistic along `exp(X)`; returns the largest relative deviation.
pub fn restriction_consistency(
    structure: &Structure,
    metric: &MetricGram,
    v: &QMat2,
    samples: usize,
    rng: &RngHandle,
) -> Result<f64> {
    let phi_v = structure.phi.apply_matrix(v);
    let devs = sample_values(samples, rng, |r| {
        let mut g = QMat2::identity();
        let mut go = Mat7::identity();
        for k in 0..3 {
            let x = sp2::random_sp2_algebra(&r.split(k));
            g = g * qmat_exp(&x)?;
            go *= so7::to_matrix(&structure.phi.apply_matrix(&x)).exp();
        }
        let lhs = metric.norm_sq(&sp2::to_coords(&(g * *v * g.sp2_inverse())));
        let rhs = deformed_norm_sq(structure, &so7::conjugate(&go, &phi_v), metric.s);
        Ok((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE))
    })?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Tests (a) `[u, v] = 0`, (b) `u exp(t v) = exp(t v) u` at the first `t`, and
/// (c) the same at every `t`, and records whether the three agree.
pub fn observation1_check(u: &QMat2, t_list: &[f64], tol: f64) -> VerificationReport {
    let mut r = VerificationReport::new("ck/observation1", "Observation 1");
    let bad_t = t_list.iter().any(|t| !(t.abs() > 0.0 && t.abs() < std::f64::consts::PI));
    if t_list.is_empty() || bad_t {
        r.fail("times must be non-empty and lie in (-pi, 0) or (0, pi)");
        return r;
    }
    let v = sp2::v_matrix();
    let a = u.commutator(&v).max_abs();
    let defect = |t: f64| -> Option<f64> {
        let e = qmat_exp(&v.scale(t)).ok()?;
        Some((*u * e - e * *u).max_abs())
    };
    let Some(b) = defect(t_list[0]) else {
        r.fail("exponential failed certification");
        return r;
    };
    let c = t_list.iter().filter_map(|&t| defect(t)).fold(0.0, f64::max);
    let (ha, hb, hc) = (a < tol, b < tol, c < tol);
    r.info("(a) |[u, v]|", a);
    r.info("(b) |[u, exp(t1 v)]|", b);
    r.info("(c) max_t |[u, exp(t v)]|", c);
    r.info("(a) holds", ha as u8 as f64);
    r.info("(b) holds", hb as u8 as f64);
    r.info("(c) holds", hc as u8 as f64);
    r.equal("equivalence (a) <=> (b) <=> (c)", (ha == hb && hb == hc) as usize, 1);
    r
}
