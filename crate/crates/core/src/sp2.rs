//! Coordinates on quaternionic sp(2) and seeded sampling of Sp(2).
//!
//! The fixed basis is orthonormal for the half-trace form
//! `<u, w>_1 = 1/2 Re tr(conj(u)^T w)`:
//!
//! | index | element |
//! |-------|---------|
//! | 0..3  | `sqrt(2) diag(q, 0)`, `q = i, j, k` |
//! | 3..6  | `sqrt(2) diag(0, q)`, `q = i, j, k` |
//! | 6..10 | `[[0, q], [-conj(q), 0]]`, `q = 1, i, j, k` |

use std::sync::OnceLock;

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::quat::{qmat_exp, retract_to_sp2, QMat2, Quaternion};
use crate::rng::RngHandle;

pub const DIM: usize = 10;

pub type Vec10 = SVector<f64, DIM>;
pub type Mat10 = SMatrix<f64, DIM, DIM>;

/// Number of exponential factors in a default `random_sp2` sample.
pub const DEFAULT_FACTORS: usize = 6;

fn build_basis() -> [QMat2; DIM] {
    let r2 = std::f64::consts::SQRT_2;
    let imag = [Quaternion::I, Quaternion::J, Quaternion::K];
    let z = Quaternion::ZERO;
    let mut out = [QMat2::zero(); DIM];
    for (k, &q) in imag.iter().enumerate() {
        out[k] = QMat2::diag(q.scale(r2), z);
        out[3 + k] = QMat2::diag(z, q.scale(r2));
    }
    for (k, q) in [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K].into_iter().enumerate() {
        out[6 + k] = QMat2::new(z, q, -q.conj(), z);
    }
    out
}

pub fn basis() -> &'static [QMat2; DIM] {
    static BASIS: OnceLock<[QMat2; DIM]> = OnceLock::new();
    BASIS.get_or_init(build_basis)
}

/// Coordinates of `u` (assumed in sp(2)) in the fixed basis.
pub fn to_coords(u: &QMat2) -> Vec10 {
    let b = basis();
    Vec10::from_fn(|i, _| b[i].half_trace_inner(u))
}

pub fn from_coords(c: &Vec10) -> QMat2 {
    basis().iter().zip(c.iter()).fold(QMat2::zero(), |acc, (b, &x)| acc + b.scale(x))
}

/// `v = diag(i, i)`, the generator of the cyclic group and of the common
/// right-invariant CK field.
pub fn v_matrix() -> QMat2 {
    QMat2::diag(Quaternion::I, Quaternion::I)
}

pub fn v_coords() -> Vec10 {
    to_coords(&v_matrix())
}

/// Structure constants: `[b_i, b_j] = sum_k c[i][j][k] b_k`.
pub fn structure_constants() -> &'static [[[f64; DIM]; DIM]; DIM] {
    static C: OnceLock<[[[f64; DIM]; DIM]; DIM]> = OnceLock::new();
    C.get_or_init(|| {
        let b = basis();
        let mut c = [[[0.0; DIM]; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                let br = to_coords(&b[i].commutator(&b[j]));
                for k in 0..DIM {
                    // The basis has entries in {0, 1, sqrt 2}; brackets land on
                    // exact multiples, so clean the rounding residue.
                    c[i][j][k] = if br[k].abs() < 1e-14 { 0.0 } else { br[k] };
                }
            }
        }
        c
    })
}

pub fn bracket(u: &Vec10, w: &Vec10) -> Vec10 {
    let c = structure_constants();
    let mut out = Vec10::zeros();
    for i in 0..DIM {
        if u[i] == 0.0 {
            continue;
        }
        for j in 0..DIM {
            let f = u[i] * w[j];
            if f == 0.0 {
                continue;
            }
            for k in 0..DIM {
                out[k] += f * c[i][j][k];
            }
        }
    }
    out
}

/// Matrix of `ad(u) = [u, .]` in the fixed basis.
pub fn ad_matrix(u: &Vec10) -> Mat10 {
    let c = structure_constants();
    let mut m = Mat10::zeros();
    for i in 0..DIM {
        if u[i] == 0.0 {
            continue;
        }
        for j in 0..DIM {
            for k in 0..DIM {
                m[(k, j)] += u[i] * c[i][j][k];
            }
        }
    }
    m
}

/// Matrix of `Ad(g): u -> g u g^{-1}` in the fixed basis.
pub fn ad_group_matrix(g: &QMat2) -> Mat10 {
    let gi = g.sp2_inverse();
    let b = basis();
    let mut m = Mat10::zeros();
    for j in 0..DIM {
        m.set_column(j, &to_coords(&(*g * b[j] * gi)));
    }
    m
}

/// Standard Gaussian element of sp(2) in the orthonormal basis.
pub fn random_sp2_algebra(rng: &RngHandle) -> QMat2 {
    let mut r = rng.rng();
    from_coords(&gaussian_coords(&mut r, 1.0))
}

fn gaussian_coords(r: &mut impl Rng, scale: f64) -> Vec10 {
    Vec10::from_fn(|_, _| scale * r.sample::<f64, _>(StandardNormal))
}

/// Product of `factors` exponentials of independent Gaussian algebra elements
/// with per-coordinate deviation `scale`, re-orthonormalized.
pub fn random_sp2_with(rng: &RngHandle, factors: usize, scale: f64) -> Result<QMat2> {
    let mut r = rng.rng();
    let mut g = QMat2::identity();
    for _ in 0..factors {
        let u = from_coords(&gaussian_coords(&mut r, scale));
        g = g * qmat_exp(&u)?;
    }
    retract_to_sp2(&g)
}

pub fn random_sp2(rng: &RngHandle) -> QMat2 {
    // Factors are certified members and the product drifts by rounding only.
    random_sp2_with(rng, DEFAULT_FACTORS, 1.0).expect("product of exponentials stays on Sp(2)")
}
