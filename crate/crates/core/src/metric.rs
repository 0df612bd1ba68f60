//! The deformed family `<.,.>_s` on quaternionic sp(2), its isometric
//! right-translation algebra `k_s`, the centralizer of `v`, and orbit ranks of
//! `C x K_s` acting on Sp(2).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{null_space, RankDecision, Subspace, MIN_GAP, ZERO_SV_REL};
use crate::quat::{is_sp2_group, QMat2};
use crate::rng::RngHandle;
use crate::so7::Structure;
use crate::sp2::{self, Mat10, Vec10, DIM};

/// Largest number of exponential factors used by the orbit sampler.
pub const ORBIT_MAX_FACTORS: usize = 8;

/// Relative singular-value threshold for orbit ranks.
pub const ORBIT_RANK_REL: f64 = 1e-8;

/// The two Gram blocks pulled back through `Phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricParts {
    pub h: Mat10,
    pub m: Mat10,
    pub lambda: f64,
}

impl MetricParts {
    pub fn new(s: &Structure) -> Self {
        let phi = &s.phi.matrix;
        let ph = s.h.projector() * phi;
        let pm = phi - &ph;
        let to10 = |m: DMatrix<f64>| Mat10::from_fn(|r, c| 0.5 * (m[(r, c)] + m[(c, r)]));
        Self { h: to10(ph.transpose() * &ph), m: to10(pm.transpose() * &pm), lambda: s.phi.lambda }
    }
}

/// Gram matrix of `<.,.>_s` on the fixed sp(2) basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricGram {
    pub s: f64,
    pub g: Mat10,
    /// Pullback scalar between the bi-invariant form and the half-trace form.
    pub lambda: f64,
    inv: Mat10,
}

impl MetricGram {
    pub fn from_parts(s: f64, parts: &MetricParts) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("deformation parameter must be positive, got {s}")));
        }
        let g = parts.h + parts.m * s;
        let chol = Cholesky::new(g).ok_or_else(|| Error::Numerical(format!("Gram matrix at s = {s} is not positive definite")))?;
        let inv = chol.inverse();
        Ok(Self { s, g, lambda: parts.lambda, inv })
    }

    pub fn inner(&self, u: &Vec10, w: &Vec10) -> f64 {
        u.dot(&(self.g * w))
    }

    pub fn norm_sq(&self, u: &Vec10) -> f64 {
        self.inner(u, u)
    }

    pub fn norm(&self, u: &Vec10) -> f64 {
        self.norm_sq(u).sqrt()
    }

    pub fn inverse(&self) -> &Mat10 {
        &self.inv
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.g).eigenvalues.min()
    }
}

pub fn build_metric(s: f64, structure: &Structure) -> Result<MetricGram> {
    MetricGram::from_parts(s, &MetricParts::new(structure))
}

fn basis_vec(i: usize) -> Vec10 {
    Vec10::from_fn(|k, _| if k == i { 1.0 } else { 0.0 })
}

/// `max |<[b_i, b_j], b_k>_s + <b_j, [b_i, b_k]>_s|` over basis triples.
pub fn ad_invariance_defect(metric: &MetricGram) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..DIM {
        let ad = sp2::ad_matrix(&basis_vec(i));
        let sk = metric.g * ad + ad.transpose() * metric.g;
        worst = worst.max(sk.amax());
    }
    worst
}

/// Eigenvalues of `G_s` relative to `G_other`, ascending.
pub fn generalized_eigenvalues(metric: &MetricGram, other: &MetricGram) -> Vec<f64> {
    let l = Cholesky::new(other.g).expect("metric is positive definite").l();
    let li = l.try_inverse().expect("triangular factor is invertible");
    let m = li * metric.g * li.transpose();
    let mut vals: Vec<f64> = SymmetricEigen::new(0.5 * (m + m.transpose())).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Matrix (100 x 10) of `u -> G ad(u) + ad(u)^T G`, flattened column-major.
pub fn skew_defect_operator(metric: &MetricGram) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(DIM * DIM, DIM);
    for i in 0..DIM {
        let ad = sp2::ad_matrix(&basis_vec(i));
        let sk = metric.g * ad + ad.transpose() * metric.g;
        out.set_column(i, &DVector::from_column_slice(sk.as_slice()));
    }
    out
}

/// `k_s`: elements whose `ad` is skew for `<.,.>_s`, with the rank decision.
pub fn isometric_right_algebra(metric: &MetricGram) -> Result<(Subspace, RankDecision)> {
    let op = skew_defect_operator(metric);
    let scale = metric.g.norm();
    let (basis, decision) = null_space(&op, scale, ZERO_SV_REL);
    decision.require_gap("isometric right algebra", MIN_GAP)?;
    Ok((Subspace::from_orthonormal(basis), decision))
}

pub fn centralizer_of_v() -> (Subspace, RankDecision) {
    let ad = sp2::ad_matrix(&sp2::v_coords());
    let dm = DMatrix::from_column_slice(DIM, DIM, ad.as_slice());
    let (basis, decision) = null_space(&dm, dm.norm(), ZERO_SV_REL);
    (Subspace::from_orthonormal(basis), decision)
}

fn coordinate_subspace(indices: &[usize]) -> Subspace {
    let mut b = DMatrix::zeros(DIM, indices.len());
    for (j, &i) in indices.iter().enumerate() {
        b[(i, j)] = 1.0;
    }
    Subspace::from_orthonormal(b)
}

/// `u(2)`: matrices with entries in `R + R i`, i.e. span of `diag(i, 0)`,
/// `diag(0, i)`, `E(1)`, `E(i)`.
pub fn complex_subalgebra() -> Subspace {
    coordinate_subspace(&[0, 3, 6, 7])
}

/// `sp(1) + sp(1)`: the diagonal matrices.
pub fn diagonal_subalgebra() -> Subspace {
    coordinate_subspace(&[0, 1, 2, 3, 4, 5])
}

/// `diag(0, Im H)`, the preimage of `sp(2) ∩ h` under `Phi`.
pub fn second_factor() -> Subspace {
    coordinate_subspace(&[3, 4, 5])
}

/// `span{diag(i, 0), diag(0, i)}`.
pub fn diagonal_torus() -> Subspace {
    coordinate_subspace(&[0, 3])
}

/// Largest component of `[k, n]` outside `n` over basis pairs.
pub fn normalizer_defect(k: &Subspace, n: &Subspace) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..k.dim() {
        let ki = Vec10::from_column_slice(k.basis.column(i).as_slice());
        for j in 0..n.dim() {
            let nj = Vec10::from_column_slice(n.basis.column(j).as_slice());
            let br = sp2::bracket(&ki, &nj);
            worst = worst.max(n.residual(&DVector::from_column_slice(br.as_slice())));
        }
    }
    worst
}

/// Rank of the orbit of `C x K_s` through `g`, from the tangent vectors
/// `X g` and `g Y` left-translated to the identity.
pub fn orbit_rank_at(g: &QMat2, c: &Subspace, ks: &Subspace) -> RankDecision {
    let ad_inv = sp2::ad_group_matrix(&g.sp2_inverse());
    let n = c.dim() + ks.dim();
    let mut cols = DMatrix::zeros(DIM, n);
    for i in 0..c.dim() {
        let x = Vec10::from_column_slice(c.basis.column(i).as_slice());
        cols.set_column(i, &DVector::from_column_slice((ad_inv * x).as_slice()));
    }
    for j in 0..ks.dim() {
        cols.set_column(c.dim() + j, &ks.basis.column(j));
    }
    let svals: Vec<f64> = if n == 0 {
        Vec::new()
    } else {
        cols.svd(false, false).singular_values.iter().copied().collect()
    };
    RankDecision::from_singular_values(&svals, 1.0, ORBIT_RANK_REL)
}

/// Orbit sample `i`: alternately near the identity and far from it, with up
/// to `ORBIT_MAX_FACTORS` exponential factors.
pub fn orbit_sample(rng: &RngHandle, i: u64) -> Result<QMat2> {
    let factors = 1 + (i as usize % ORBIT_MAX_FACTORS);
    let scale = if i % 3 == 0 { 0.05 } else { 1.0 };
    sp2::random_sp2_with(&rng.split(i), factors, scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub s: f64,
    pub dim_c: usize,
    pub dim_ks: usize,
    pub ks_gap: f64,
    pub dim_intersection: usize,
    pub rank_at_identity: usize,
    pub max_rank_over_samples: usize,
    /// Smallest rank gap among the samples attaining the maximum.
    pub min_gap_at_max: f64,
    pub sample_count: usize,
    pub seed: u64,
}

pub fn orbit_survey(structure: &Structure, s: f64, sample_count: usize, rng: &RngHandle) -> Result<OrbitReport> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("orbit survey needs at least one sample".into()));
    }
    let metric = build_metric(s, structure)?;
    let (ks, kd) = isometric_right_algebra(&metric)?;
    let (c, _) = centralizer_of_v();
    let dim_intersection = c.intersection(&ks, 1e-8).dim();
    let rank_at_identity = orbit_rank_at(&QMat2::identity(), &c, &ks).rank;
    let ranks = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let g = orbit_sample(rng, i)?;
            if !is_sp2_group(&g, 1e-12) {
                return Err(Error::Numerical("orbit sample left Sp(2)".into()));
            }
            let d = orbit_rank_at(&g, &c, &ks);
            Ok((d.rank, d.gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rank = ranks.iter().map(|r| r.0).max().unwrap_or(0);
    let min_gap_at_max = ranks.iter().filter(|r| r.0 == max_rank).map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(OrbitReport {
        s,
        dim_c: c.dim(),
        dim_ks: ks.dim(),
        ks_gap: kd.gap,
        dim_intersection,
        rank_at_identity,
        max_rank_over_samples: max_rank,
        min_gap_at_max,
        sample_count,
        seed: rng.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn parts() -> &'static MetricParts {
        static P: OnceLock<MetricParts> = OnceLock::new();
        P.get_or_init(|| MetricParts::new(&Structure::build().unwrap()))
    }

    #[test]
    fn bi_invariant_at_one() {
        let m = MetricGram::from_parts(1.0, parts()).unwrap();
        assert!(ad_invariance_defect(&m) < 1e-10);
        assert!((m.g - Mat10::identity() * 4.0).amax() < 1e-10);
    }

    #[test]
    fn v_norm_ratio() {
        let v = sp2::v_coords();
        let g1 = MetricGram::from_parts(1.0, parts()).unwrap();
        for s in [0.5, 0.8, 1.2, 3.0] {
            let gs = MetricGram::from_parts(s, parts()).unwrap();
            assert!((gs.norm_sq(&v) / g1.norm_sq(&v) - (2.0 + s) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_s_is_rejected() {
        assert!(MetricGram::from_parts(0.0, parts()).is_err());
        assert!(MetricGram::from_parts(-1.0, parts()).is_err());
    }

    #[test]
    fn centralizer_is_u2() {
        let (c, _) = centralizer_of_v();
        assert_eq!(c.dim(), 4);
        assert!(c.distance(&complex_subalgebra()).unwrap() < 1e-10);
    }
}
