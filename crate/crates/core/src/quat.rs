//! Quaternions and 2x2 quaternionic matrices.
//!
//! `QMat2` is the concrete model of the compact group Sp(2) (`conj(g)^T g = 1`)
//! and of its Lie algebra sp(2) (`conj(u)^T + u = 0`). Transcendental operations
//! (exponential, logarithm, spectra) go through the complex embedding
//! `H^{2x2} -> C^{4x4}`, `a + b j -> [[a, b], [-conj(b), conj(a)]]`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Complex, Matrix4, Schur, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat4 = Matrix4<C64>;

/// Membership tolerance every exponential is re-certified against.
pub const EXP_CERT_TOL: f64 = 1e-10;

/// Distance from `-1` below which an eigenvalue is treated as lying on the
/// cut locus of the logarithm.
pub const CUT_LOCUS_TOL: f64 = 1e-9;

/// Largest embedded Frobenius distance `retract_to_sp2` accepts.
pub const RETRACT_MAX_DIST: f64 = 0.1;

/// `w + x i + y j + z k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Real part of `conj(self) * other`, the Euclidean dot product on R^4.
    pub fn dot(self, other: Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Quaternionic exponential, `e^{w} (cos|v| + v/|v| sin|v|)`.
    pub fn exp(self) -> Self {
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        let ew = self.w.exp();
        // sin(vn)/vn, with its Taylor tail near zero
        let sinc = if vn < 1e-8 { 1.0 - vn * vn / 6.0 } else { vn.sin() / vn };
        Self::new(ew * vn.cos(), ew * sinc * self.x, ew * sinc * self.y, ew * sinc * self.z)
    }

    /// `(a, b)` with `self = a + b j`, `a, b` complex.
    pub fn to_complex_pair(self) -> (C64, C64) {
        (C64::new(self.w, self.x), C64::new(self.y, self.z))
    }

    pub fn from_complex_pair(a: C64, b: C64) -> Self {
        Self::new(a.re, a.im, b.re, b.im)
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.6}{:+.6}i{:+.6}j{:+.6}k", self.w, self.x, self.y, self.z)
    }
}

pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// A 2x2 matrix over the quaternions, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QMat2 {
    pub entries: [[Quaternion; 2]; 2],
}

impl QMat2 {
    pub const fn new(a: Quaternion, b: Quaternion, c: Quaternion, d: Quaternion) -> Self {
        Self { entries: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::diag(Quaternion::ONE, Quaternion::ONE)
    }

    pub fn diag(a: Quaternion, d: Quaternion) -> Self {
        Self::new(a, Quaternion::ZERO, Quaternion::ZERO, d)
    }

    pub fn get(&self, r: usize, c: usize) -> Quaternion {
        self.entries[r][c]
    }

    pub fn conj_transpose(&self) -> Self {
        let e = &self.entries;
        Self::new(e[0][0].conj(), e[1][0].conj(), e[0][1].conj(), e[1][1].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|q| q.scale(s))
    }

    pub fn map(&self, f: impl Fn(Quaternion) -> Quaternion) -> Self {
        let e = &self.entries;
        Self::new(f(e[0][0]), f(e[0][1]), f(e[1][0]), f(e[1][1]))
    }

    fn zip(&self, o: &Self, f: impl Fn(Quaternion, Quaternion) -> Quaternion) -> Self {
        let (a, b) = (&self.entries, &o.entries);
        Self::new(
            f(a[0][0], b[0][0]),
            f(a[0][1], b[0][1]),
            f(a[1][0], b[1][0]),
            f(a[1][1], b[1][1]),
        )
    }

    /// `[self, o] = self o - o self`.
    pub fn commutator(&self, o: &Self) -> Self {
        *self * *o - *o * *self
    }

    /// Entrywise Euclidean norm, `sqrt(sum |q_ab|^2)`. The embedded C^{4x4}
    /// Frobenius norm is `sqrt(2)` times this.
    pub fn frobenius(&self) -> f64 {
        self.entries.iter().flatten().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .flat_map(|q| [q.w, q.x, q.y, q.z])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `1/2 Re tr(conj(self)^T o)`; on sp(2) this is the bi-invariant form with
    /// `|diag(i, i)| = 1`.
    pub fn half_trace_inner(&self, o: &Self) -> f64 {
        0.5 * self
            .entries
            .iter()
            .flatten()
            .zip(o.entries.iter().flatten())
            .map(|(a, b)| a.dot(*b))
            .sum::<f64>()
    }

    /// Flat `[w, x, y, z]` quadruples of the entries, row-major.
    pub fn to_array(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (k, q) in self.entries.iter().flatten().enumerate() {
            out[4 * k..4 * k + 4].copy_from_slice(&[q.w, q.x, q.y, q.z]);
        }
        out
    }

    pub fn from_array(a: &[f64; 16]) -> Self {
        let q = |k: usize| Quaternion::new(a[4 * k], a[4 * k + 1], a[4 * k + 2], a[4 * k + 3]);
        Self::new(q(0), q(1), q(2), q(3))
    }

    /// Group inverse, valid for members of Sp(2).
    pub fn sp2_inverse(&self) -> Self {
        self.conj_transpose()
    }
}

impl Add for QMat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.zip(&o, |a, b| a + b)
    }
}

impl Sub for QMat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.zip(&o, |a, b| a - b)
    }
}

impl Neg for QMat2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|q| -q)
    }
}

impl Mul for QMat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.entries, &o.entries);
        let cell = |r: usize, c: usize| a[r][0] * b[0][c] + a[r][1] * b[1][c];
        Self::new(cell(0, 0), cell(0, 1), cell(1, 0), cell(1, 1))
    }
}

impl Mul<f64> for QMat2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

pub fn qmat_mul(a: &QMat2, b: &QMat2) -> QMat2 {
    *a * *b
}

pub fn qmat_add(a: &QMat2, b: &QMat2) -> QMat2 {
    *a + *b
}

pub fn qmat_scale(a: &QMat2, s: f64) -> QMat2 {
    a.scale(s)
}

pub fn qmat_conj_transpose(a: &QMat2) -> QMat2 {
    a.conj_transpose()
}

/// `conj(g)^T g = 1` entrywise within `tol`.
pub fn is_sp2_group(g: &QMat2, tol: f64) -> bool {
    (g.conj_transpose() * *g - QMat2::identity()).max_abs() <= tol
}

/// `conj(u)^T + u = 0` entrywise within `tol`.
pub fn is_sp2_algebra(u: &QMat2, tol: f64) -> bool {
    (u.conj_transpose() + *u).max_abs() <= tol
}

pub fn embed_c4(m: &QMat2) -> CMat4 {
    let mut out = CMat4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            let (a, b) = m.entries[r][c].to_complex_pair();
            out[(2 * r, 2 * c)] = a;
            out[(2 * r, 2 * c + 1)] = b;
            out[(2 * r + 1, 2 * c)] = -b.conj();
            out[(2 * r + 1, 2 * c + 1)] = a.conj();
        }
    }
    out
}

/// Anti-linear map `x -> Omega conj(x)` commuting with every embedded
/// matrix; `Omega` is block-diagonal with blocks `[[0, 1], [-1, 0]]`.
fn quaternionic_structure(x: &Vector4<C64>) -> Vector4<C64> {
    Vector4::new(x[1].conj(), -x[0].conj(), x[3].conj(), -x[2].conj())
}

/// Orthogonal projection of a complex 4x4 matrix back onto the image of the
/// embedding (exact left inverse of `embed_c4`).
pub fn project_from_c4(m: &CMat4) -> QMat2 {
    let mut out = QMat2::zero();
    for r in 0..2 {
        for c in 0..2 {
            let a = (m[(2 * r, 2 * c)] + m[(2 * r + 1, 2 * c + 1)].conj()) * 0.5;
            let b = (m[(2 * r, 2 * c + 1)] - m[(2 * r + 1, 2 * c)].conj()) * 0.5;
            out.entries[r][c] = Quaternion::from_complex_pair(a, b);
        }
    }
    out
}

/// Matrix exponential through the complex embedding (Padé scaling and
/// squaring), re-certified as a member of Sp(2).
pub fn qmat_exp(u: &QMat2) -> Result<QMat2> {
    let g = project_from_c4(&embed_c4(u).exp());
    if !is_sp2_group(&g, EXP_CERT_TOL) {
        return Err(Error::Numerical(format!(
            "exponential left Sp(2): membership defect {:.3e}",
            (g.conj_transpose() * g - QMat2::identity()).max_abs()
        )));
    }
    Ok(g)
}

fn unitary_defect(m: &CMat4) -> f64 {
    (m.adjoint() * m - CMat4::identity()).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Tolerance on unitarity of the embedded matrix for spectral operations.
pub const UNITARY_TOL: f64 = 1e-8;

/// Eigen-decomposition of the embedded unitary matrix: unitary `V` and the
/// unit-modulus eigenvalues, so that `embed(g) = V diag(lambda) V^*`.
fn unitary_eigen(g: &QMat2) -> Result<(CMat4, [C64; 4])> {
    let m = embed_c4(g);
    let defect = unitary_defect(&m);
    if defect > UNITARY_TOL {
        return Err(Error::Numerical(format!(
            "embedded matrix not unitary (defect {defect:.3e})"
        )));
    }
    // A normal matrix is diagonalized by any eigenbasis of a generic Hermitian
    // combination of its Hermitian and anti-Hermitian parts.
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let anti = (m - m.adjoint()) * C64::new(0.0, -0.5);
    let mix = herm + anti * C64::new(0.577_215_664_901_532_9, 0.0);
    let eig = SymmetricEigen::new(mix);
    let v = eig.eigenvectors;
    let mut lambdas = [C64::new(0.0, 0.0); 4];
    for (k, l) in lambdas.iter_mut().enumerate() {
        let col = v.column(k);
        let rq = (col.adjoint() * m * col)[(0, 0)];
        *l = rq / rq.norm();
    }
    Ok((v, lambdas))
}

/// The pair `(theta_1, theta_2)`, `pi >= theta_1 >= theta_2 >= 0`, such that
/// `g` is conjugate in Sp(2) to `diag(exp(theta_1 i), exp(theta_2 i))`.
pub fn eigenangles(g: &QMat2) -> Result<(f64, f64)> {
    let m = embed_c4(g);
    let defect = unitary_defect(&m);
    if defect > UNITARY_TOL {
        return Err(Error::Numerical(format!(
            "embedded matrix not unitary (defect {defect:.3e})"
        )));
    }
    let schur = Schur::try_new(m, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut angles: Vec<f64> = (0..4).map(|k| t[(k, k)].arg().abs()).collect();
    angles.sort_by(|a, b| b.total_cmp(a));
    // The spectrum is closed under conjugation, so the sorted |args| pair up.
    Ok((0.5 * (angles[0] + angles[1]), 0.5 * (angles[2] + angles[3])))
}

/// Principal logarithm on Sp(2): the algebra element `u` with eigenangles in
/// `[0, pi]` and `exp(u) = g`. On the cut locus (an eigenangle equal to `pi`)
/// one of the minimal logarithms is returned.
pub fn qmat_log(g: &QMat2) -> Result<QMat2> {
    let (v, lambdas) = unitary_eigen(g)?;
    let mut l = CMat4::zeros();
    let mut cut = Vec::new();
    for k in 0..4 {
        let col = v.column(k).into_owned();
        if (lambdas[k] + C64::new(1.0, 0.0)).norm() < CUT_LOCUS_TOL {
            cut.push(col);
        } else {
            l += col * col.adjoint() * C64::new(0.0, lambdas[k].arg());
        }
    }
    // The -1 eigenspace is invariant under the quaternionic structure sigma;
    // pairing w with sigma(w) and assigning +pi / -pi keeps the result in the
    // image of the embedding.
    let mut paired: Vec<Vector4<C64>> = Vec::new();
    for mut w in cut {
        for p in &paired {
            w -= p * p.dotc(&w);
        }
        let n = w.norm();
        if n < 0.5 {
            continue;
        }
        w /= C64::new(n, 0.0);
        let sw = quaternionic_structure(&w);
        l += &w * w.adjoint() * C64::new(0.0, PI) - &sw * sw.adjoint() * C64::new(0.0, PI);
        paired.push(w);
        paired.push(sw);
    }
    let l = project_from_c4(&l);
    // Skew-Hermitian part; removes rounding noise from the projection.
    Ok((l - l.conj_transpose()).scale(0.5))
}

/// Polar retraction onto Sp(2): the unitary factor of `m`, computed with the
/// Newton-Schulz iteration `X <- X (3 - X^* X) / 2`. Quaternionic arithmetic
/// commutes with the embedding, so this equals the polar factor of
/// `embed_c4(m)` read back through the embedding.
pub fn retract_to_sp2(m: &QMat2) -> Result<QMat2> {
    let id = QMat2::identity();
    let gram_defect = (m.conj_transpose() * *m - id).frobenius() * 2f64.sqrt();
    // ||X^* X - 1|| <= 2 d + d^2 for embedded distance d.
    if !gram_defect.is_finite() || gram_defect > 2.0 * RETRACT_MAX_DIST + RETRACT_MAX_DIST.powi(2) {
        return Err(Error::Numerical(format!(
            "matrix too far from Sp(2) to retract (gram defect {gram_defect:.3e})"
        )));
    }
    let mut x = *m;
    for _ in 0..60 {
        let e = x.conj_transpose() * x - id;
        if e.max_abs() < 1e-16 {
            break;
        }
        x = x * (id - e.scale(0.5));
    }
    let dist = (x - *m).frobenius() * 2f64.sqrt();
    if dist > RETRACT_MAX_DIST {
        return Err(Error::Numerical(format!(
            "matrix too far from Sp(2) to retract (distance {dist:.3e})"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    #[test]
    fn basis_relations() {
        let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
        assert_eq!(i * j, k);
        assert_eq!(j * k, i);
        assert_eq!(k * i, j);
        for e in [i, j, k] {
            assert_eq!(e * e, -Quaternion::ONE);
        }
        assert_eq!(i * j * k, -Quaternion::ONE);
        assert_eq!(j * i, -k);
    }

    #[test]
    fn conj_reverses_products() {
        let a = q(0.3, -1.2, 0.5, 2.0);
        let b = q(-0.7, 0.1, 1.4, -0.2);
        let lhs = (a * b).conj();
        let rhs = b.conj() * a.conj();
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn sp2_algebra_membership_of_diag_i() {
        let u = QMat2::diag(Quaternion::I, Quaternion::I);
        assert!((u.conj_transpose() + u).max_abs() == 0.0);
        assert!(is_sp2_algebra(&u, 1e-15));
    }

    #[test]
    fn group_membership_cases() {
        assert!(is_sp2_group(&QMat2::identity(), 1e-14));
        for theta in [0.0, 0.3, 1.0, 2.5, -3.0] {
            let e = Quaternion::I.scale(theta).exp();
            assert!(is_sp2_group(&QMat2::diag(e, e), 1e-14));
        }
        let mut g = QMat2::identity();
        g.entries[0] = [g.entries[0][0].scale(1.01), g.entries[0][1].scale(1.01)];
        assert!(!is_sp2_group(&g, 1e-3));
    }

    #[test]
    fn exp_of_pi_diag_i_is_minus_identity() {
        let v = QMat2::diag(Quaternion::I, Quaternion::I);
        let g = qmat_exp(&v.scale(PI)).unwrap();
        assert!((g + QMat2::identity()).max_abs() < 1e-14);
        assert_eq!(qmat_exp(&QMat2::zero()).unwrap(), QMat2::identity());
        for t in [0.1, 1.0, 2.9, -2.0] {
            let g = qmat_exp(&v.scale(t)).unwrap();
            let e = Quaternion::I.scale(t).exp();
            assert!((g - QMat2::diag(e, e)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_of_identity_and_spectrum() {
        assert_eq!(embed_c4(&QMat2::identity()), CMat4::identity());
        let t0 = 1.1;
        let e = Quaternion::I.scale(t0).exp();
        let m = embed_c4(&QMat2::diag(e, e));
        let schur = Schur::new(m);
        let (_, t) = schur.unpack();
        let mut args: Vec<f64> = (0..4).map(|k| t[(k, k)].arg()).collect();
        args.sort_by(|a, b| a.total_cmp(b));
        for (a, want) in args.iter().zip([-t0, -t0, t0, t0]) {
            assert!((a - want).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenangles_of_special_elements() {
        let (a, b) = eigenangles(&QMat2::identity()).unwrap();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        let t0 = 2.0;
        let e = Quaternion::I.scale(t0).exp();
        let (a, b) = eigenangles(&QMat2::diag(e, e)).unwrap();
        assert!((a - t0).abs() < 1e-12 && (b - t0).abs() < 1e-12);
        let (a, b) = eigenangles(&(-QMat2::identity())).unwrap();
        assert!((a - PI).abs() < 1e-12 && (b - PI).abs() < 1e-12);
        let bad = QMat2::identity().scale(1.1);
        assert!(eigenangles(&bad).is_err());
    }

    #[test]
    fn retraction_contracts() {
        let mut m = QMat2::identity();
        m.entries[0][1] = q(1e-9, -2e-9, 0.0, 5e-10);
        let r = retract_to_sp2(&m).unwrap();
        assert!((r - QMat2::identity()).max_abs() < 1e-8);
        assert!(is_sp2_group(&r, 1e-14));
        let far = QMat2::identity().scale(1.5);
        assert!(retract_to_sp2(&far).is_err());
        let e = Quaternion::J.scale(0.7).exp();
        let g = QMat2::diag(e, Quaternion::ONE);
        assert!((retract_to_sp2(&g).unwrap() - g).max_abs() < 1e-15);
    }

    #[test]
    fn log_inverts_exp_on_the_principal_branch() {
        let u = QMat2::new(q(0.0, 0.4, -0.2, 0.1), q(0.3, 0.5, 0.0, -0.4), q(-0.3, 0.5, 0.0, -0.4), q(0.0, -0.6, 0.2, 0.9));
        assert!(is_sp2_algebra(&u, 1e-15));
        let g = qmat_exp(&u).unwrap();
        let l = qmat_log(&g).unwrap();
        assert!((l - u).max_abs() < 1e-12, "{:?}", l - u);
    }

    #[test]
    fn log_on_the_cut_locus() {
        let minus = -QMat2::identity();
        let e = Quaternion::J.scale(0.8).exp();
        let half = QMat2::diag(-Quaternion::ONE, e);
        let (c, s) = (0.6, 0.8);
        let r = QMat2::new(q(c, 0.0, 0.0, 0.0), q(s, 0.0, 0.0, 0.0), q(-s, 0.0, 0.0, 0.0), q(c, 0.0, 0.0, 0.0));
        for g in [minus, half, r * half * r.conj_transpose()] {
            let l = qmat_log(&g).unwrap();
            assert!(is_sp2_algebra(&l, 1e-14));
            assert!((qmat_exp(&l).unwrap() - g).max_abs() < 1e-9, "{g:?}");
        }
    }
}
