//! Rank decisions and subspace arithmetic on real coordinate spaces.
//!
//! Every dimension claim in the crate is decided here, from a singular-value
//! spectrum, with an explicit gap requirement.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a singular value counts as zero.
pub const ZERO_SV_REL: f64 = 1e-8;

/// Minimum ratio between the smallest retained and the largest discarded
/// singular value.
pub const MIN_GAP: f64 = 1e4;

/// Outcome of thresholding a singular-value spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub rank: usize,
    /// Ratio between the last retained and the first discarded singular value
    /// (a machine-precision floor stands in for a missing neighbour).
    pub gap: f64,
    pub singular_values: Vec<f64>,
    pub scale: f64,
}

impl RankDecision {
    /// `svals` sorted descending; `scale` is the natural magnitude of the
    /// operator, so that an all-zero spectrum is recognized as such.
    pub fn from_singular_values(svals: &[f64], scale: f64, rel_threshold: f64) -> Self {
        let scale = if scale > 0.0 { scale } else { svals.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE) };
        let cut = rel_threshold * scale;
        let rank = svals.iter().take_while(|&&s| s > cut).count();
        let floor = scale * f64::EPSILON;
        let above = if rank == 0 { scale } else { svals[rank - 1] };
        let below = svals.get(rank).copied().unwrap_or(0.0).max(floor);
        Self { rank, gap: above / below, singular_values: svals.to_vec(), scale }
    }

    pub fn require_gap(&self, context: &str, required: f64) -> Result<()> {
        if self.gap < required {
            return Err(Error::AmbiguousRank { context: context.into(), gap: self.gap, required });
        }
        Ok(())
    }
}

fn svd_full_v(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested V");
    (svd.singular_values.iter().copied().collect(), v_t.transpose())
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn null_space(a: &DMatrix<f64>, scale: f64, rel_threshold: f64) -> (DMatrix<f64>, RankDecision) {
    let n = a.ncols();
    let (svals, v) = svd_full_v(a);
    let decision = RankDecision::from_singular_values(&svals, scale, rel_threshold);
    let basis = v.columns(decision.rank, n - decision.rank).into_owned();
    (basis, decision)
}

/// Orthonormal basis of the column span of `a`.
pub fn column_span(a: &DMatrix<f64>, scale: f64, rel_threshold: f64) -> (DMatrix<f64>, RankDecision) {
    if a.ncols() == 0 {
        return (DMatrix::zeros(a.nrows(), 0), RankDecision::from_singular_values(&[], scale, rel_threshold));
    }
    let svd = SVD::new(a.clone(), true, false);
    let svals: Vec<f64> = svd.singular_values.iter().copied().collect();
    let decision = RankDecision::from_singular_values(&svals, scale, rel_threshold);
    let u = svd.u.expect("requested U");
    (u.columns(0, decision.rank).into_owned(), decision)
}

/// Symmetric eigen-decomposition with eigenvalues sorted ascending.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Groups sorted values into runs whose consecutive differences stay within
/// `tol`; returns `(start, len)` pairs.
pub fn cluster_sorted(vals: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || (vals[i] - vals[i - 1]).abs() > tol {
            out.push((start, i - start));
            start = i;
        }
    }
    out
}

/// A linear subspace of a coordinate space, held as an orthonormal basis
/// (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    pub basis: DMatrix<f64>,
}

impl Subspace {
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn zero(ambient: usize) -> Self {
        Self { basis: DMatrix::zeros(ambient, 0) }
    }

    /// Span of the given column vectors; rank decided at `rel_threshold`
    /// relative to the largest input norm.
    pub fn span_of(vectors: &DMatrix<f64>, rel_threshold: f64) -> (Self, RankDecision) {
        let scale = vectors.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        let (basis, decision) = column_span(vectors, scale, rel_threshold);
        (Self { basis }, decision)
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Distance from `v` to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    pub fn orthogonal_complement(&self) -> Self {
        let n = self.ambient();
        let p = DMatrix::identity(n, n) - self.projector();
        let (basis, _) = column_span(&p, 1.0, 1e-6);
        Self { basis }
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        (g - DMatrix::identity(self.dim(), self.dim())).amax()
    }

    /// Cosines of the principal angles to `other`, descending.
    pub fn principal_cosines(&self, other: &Subspace) -> Vec<f64> {
        if self.dim() == 0 || other.dim() == 0 {
            return Vec::new();
        }
        let m = self.basis.transpose() * &other.basis;
        SVD::new(m, false, false).singular_values.iter().copied().collect()
    }

    /// Intersection, spanned by the principal vectors with cosine above
    /// `1 - tol`.
    pub fn intersection(&self, other: &Subspace, tol: f64) -> Subspace {
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient());
        }
        let m = self.basis.transpose() * &other.basis;
        let svd = SVD::new(m, true, false);
        let u = svd.u.expect("requested U");
        let k = svd.singular_values.iter().filter(|&&c| c > 1.0 - tol).count();
        Subspace { basis: &self.basis * u.columns(0, k) }
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut cols = DMatrix::zeros(self.ambient(), self.dim() + other.dim());
        cols.columns_mut(0, self.dim()).copy_from(&self.basis);
        cols.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        Subspace::span_of(&cols, 1e-8).0
    }

    /// Largest principal-angle sine between two subspaces of equal dimension;
    /// `None` when dimensions differ.
    pub fn distance(&self, other: &Subspace) -> Option<f64> {
        if self.dim() != other.dim() {
            return None;
        }
        if self.dim() == 0 {
            return Some(0.0);
        }
        // Spectral norm of (I - P_self) B avoids the cancellation in sqrt(1 - c^2).
        let off = &other.basis - self.projector() * &other.basis;
        Some(SVD::new(off, false, false).singular_values.iter().copied().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_deficient_matrix() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let (ns, d) = null_space(&a, 1.0, ZERO_SV_REL);
        assert_eq!(d.rank, 2);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).amax() < 1e-14);
        assert!(d.gap > 1e10);
    }

    #[test]
    fn all_zero_operator_has_full_null_space() {
        let a = DMatrix::<f64>::zeros(5, 3);
        let (ns, d) = null_space(&a, 1.0, ZERO_SV_REL);
        assert_eq!(d.rank, 0);
        assert_eq!(ns.ncols(), 3);
        assert!(d.gap >= 1e4);
    }

    #[test]
    fn ambiguous_gap_is_reported() {
        let d = RankDecision::from_singular_values(&[1.0, 1e-7, 1e-9], 1.0, ZERO_SV_REL);
        assert_eq!(d.rank, 2);
        assert!(d.require_gap("toy", MIN_GAP).is_err());
    }

    #[test]
    fn intersection_of_coordinate_planes() {
        let e = |cols: &[usize]| {
            let mut m = DMatrix::zeros(4, cols.len());
            for (j, &c) in cols.iter().enumerate() {
                m[(c, j)] = 1.0;
            }
            Subspace::from_orthonormal(m)
        };
        let a = e(&[0, 1, 2]);
        let b = e(&[1, 2, 3]);
        assert_eq!(a.intersection(&b, 1e-9).dim(), 2);
        assert_eq!(a.sum(&b).dim(), 4);
        assert_eq!(a.orthogonal_complement().dim(), 1);
        assert!(e(&[0]).intersection(&e(&[3]), 1e-9).dim() == 0);
    }

    #[test]
    fn clustering() {
        let runs = cluster_sorted(&[-1.0, -1.0 + 1e-9, 0.0, 0.5, 0.5], 1e-7);
        assert_eq!(runs, vec![(0, 2), (2, 1), (3, 2)]);
    }
}
