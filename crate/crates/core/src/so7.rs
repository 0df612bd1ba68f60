//! so(7) with the G2 isotropy algebra, an adapted Cartan subalgebra, root
//! planes, and the isomorphism between quaternionic sp(2) and the copy of
//! sp(2) = so(5) spanned by the roots `+-e1, +-e2, +-e1 +- e2`.
//!
//! Elements of so(7) are coordinate vectors in the basis `E_ab = e_a e_b^T -
//! e_b e_a^T` (`a < b`, lexicographic), which is orthonormal for the
//! bi-invariant form `<X, Y> = -1/2 tr(XY)`. With that form the short roots
//! have unit length, so no rescaling is needed.

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cluster_sorted, null_space, sorted_symmetric_eigen, Subspace, MIN_GAP, ZERO_SV_REL};
use crate::quat::{QMat2, Quaternion};
use crate::report::VerificationReport;
use crate::rng::RngHandle;
use crate::sp2;

pub const DIM: usize = 21;
pub type Mat7 = SMatrix<f64, 7, 7>;

/// Seed of the deterministic generic elements used during construction.
pub const STRUCTURE_SEED: u64 = 0x5EED_0007;

/// Eigenvalue clustering tolerance for root extraction.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Coefficients of the generic Cartan element `c1 e1 + c2 e2 + c3 e3`; the
/// values `|<x, alpha>|` are pairwise distinct over the positive roots.
const GENERIC_CARTAN: [f64; 3] = [1.0, 0.37, 0.13];

pub const STRUCTURE_SCHEMA_VERSION: &str = "1";

/// Positive roots of B3 as integer coefficient vectors over `e1, e2, e3`.
pub const POSITIVE_ROOTS: [[i32; 3]; 9] = [
    [1, -1, 0],
    [1, 0, -1],
    [0, 1, -1],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
];

pub fn index_pairs() -> &'static [(usize, usize); DIM] {
    const P: [(usize, usize); DIM] = {
        let mut out = [(0, 0); DIM];
        let mut k = 0;
        let mut a = 0;
        while a < 7 {
            let mut b = a + 1;
            while b < 7 {
                out[k] = (a, b);
                k += 1;
                b += 1;
            }
            a += 1;
        }
        out
    };
    &P
}

pub fn to_matrix(x: &DVector<f64>) -> Mat7 {
    let mut m = Mat7::zeros();
    for (k, &(a, b)) in index_pairs().iter().enumerate() {
        m[(a, b)] = x[k];
        m[(b, a)] = -x[k];
    }
    m
}

/// Coordinates of the antisymmetric part of `m`.
pub fn to_coords(m: &Mat7) -> DVector<f64> {
    DVector::from_iterator(DIM, index_pairs().iter().map(|&(a, b)| 0.5 * (m[(a, b)] - m[(b, a)])))
}

pub fn unit(k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(DIM);
    v[k] = 1.0;
    v
}

pub fn bracket(x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (a, b) = (to_matrix(x), to_matrix(y));
    to_coords(&(a * b - b * a))
}

/// `-1/2 tr(XY)`, which is the Euclidean dot product of coordinates.
pub fn bi_inner(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    x.dot(y)
}

pub fn ad_matrix(x: &DVector<f64>) -> DMatrix<f64> {
    let xm = to_matrix(x);
    let mut out = DMatrix::zeros(DIM, DIM);
    for j in 0..DIM {
        let e = to_matrix(&unit(j));
        out.set_column(j, &to_coords(&(xm * e - e * xm)));
    }
    out
}

/// Conjugation `g x g^T` by an orthogonal 7x7 matrix.
pub fn conjugate(g: &Mat7, x: &DVector<f64>) -> DVector<f64> {
    to_coords(&(g * to_matrix(x) * g.transpose()))
}

/// Largest Jacobi-identity defect over all basis triples.
pub fn jacobi_defect() -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..DIM {
        for j in 0..DIM {
            let bij = bracket(&unit(i), &unit(j));
            for k in 0..DIM {
                let jac = bracket(&unit(k), &bij)
                    + bracket(&unit(i), &bracket(&unit(j), &unit(k)))
                    + bracket(&unit(j), &bracket(&unit(k), &unit(i)));
                worst = worst.max(jac.amax());
            }
        }
    }
    worst
}

/// The associative calibration 3-form
/// `e123 + e145 + e167 + e246 - e257 - e347 - e356` (1-based indices), as a
/// fully antisymmetric tensor.
pub fn three_form() -> [[[f64; 7]; 7]; 7] {
    let terms: [(usize, usize, usize, f64); 7] = [
        (0, 1, 2, 1.0),
        (0, 3, 4, 1.0),
        (0, 5, 6, 1.0),
        (1, 3, 5, 1.0),
        (1, 4, 6, -1.0),
        (2, 3, 6, -1.0),
        (2, 4, 5, -1.0),
    ];
    let mut phi = [[[0.0; 7]; 7]; 7];
    for (a, b, c, s) in terms {
        for (p, q, r, sign) in [(a, b, c, 1.0), (b, c, a, 1.0), (c, a, b, 1.0), (b, a, c, -1.0), (a, c, b, -1.0), (c, b, a, -1.0)] {
            phi[p][q][r] = s * sign;
        }
    }
    phi
}

/// Matrix (35 x 21) of `X -> X . phi` on components `a < b < c`.
pub fn three_form_action_matrix() -> DMatrix<f64> {
    let phi = three_form();
    let triples: Vec<(usize, usize, usize)> = (0..7)
        .flat_map(|a| (a + 1..7).flat_map(move |b| (b + 1..7).map(move |c| (a, b, c))))
        .collect();
    let mut out = DMatrix::zeros(triples.len(), DIM);
    for j in 0..DIM {
        let x = to_matrix(&unit(j));
        for (row, &(a, b, c)) in triples.iter().enumerate() {
            let mut acc = 0.0;
            for d in 0..7 {
                acc += x[(d, a)] * phi[d][b][c] + x[(d, b)] * phi[a][d][c] + x[(d, c)] * phi[a][b][d];
            }
            out[(row, j)] = -acc;
        }
    }
    out
}

/// A positive root with an adapted basis `(u, v)` of its root plane:
/// `[x, u] = <x, alpha> v` and `[x, v] = -<x, alpha> u` for `x` in the Cartan.
#[derive(Clone, Debug, PartialEq)]
pub struct RootDatum {
    pub label: [i32; 3],
    /// Measured coefficients over `e1, e2, e3`.
    pub root: [f64; 3],
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl RootDatum {
    pub fn plane(&self) -> Subspace {
        let mut b = DMatrix::zeros(DIM, 2);
        b.set_column(0, &self.u);
        b.set_column(1, &self.v);
        Subspace::from_orthonormal(b)
    }

    pub fn root_vector(&self, e: &DMatrix<f64>) -> DVector<f64> {
        e * DVector::from_row_slice(&self.root)
    }
}

/// The quaternionic-to-so(7) isomorphism: `matrix` (21 x 10) maps sp(2)
/// coordinates to so(7) coordinates, and `lambda` is the pullback scalar
/// `<Phi u, Phi w>_bi = lambda <u, w>_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsoPhi {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
}

impl IsoPhi {
    pub fn apply(&self, coords: &sp2::Vec10) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(coords.as_slice())
    }

    pub fn apply_matrix(&self, u: &QMat2) -> DVector<f64> {
        self.apply(&sp2::to_coords(u))
    }
}

/// Everything the downstream modules need from the so(7) construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    /// The G2 isotropy algebra.
    pub h: Subspace,
    /// Bi-invariant orthogonal complement of `h`.
    pub m: Subspace,
    /// Columns `e1, e2, e3`, an orthonormal basis of the Cartan subalgebra.
    pub e: DMatrix<f64>,
    /// Cartan subalgebra of `h`, contained in the span of `e`.
    pub t_h: Subspace,
    /// Unit vector spanning `t ∩ m`.
    pub n: DVector<f64>,
    pub roots: Vec<RootDatum>,
    /// sp(2) inside so(7).
    pub sp2: Subspace,
    pub phi: IsoPhi,
}

fn generic_vector(dim: usize, name: &str) -> DVector<f64> {
    use rand::Rng;
    let mut r = RngHandle::new(STRUCTURE_SEED).split_named(name).rng();
    DVector::from_fn(dim, |_, _| r.random_range(-1.0..1.0))
}

fn lex_sign(v: &[f64], tol: f64) -> f64 {
    for &x in v {
        if x > tol {
            return 1.0;
        }
        if x < -tol {
            return -1.0;
        }
    }
    1.0
}

pub fn build_g2() -> Result<Subspace> {
    let a = three_form_action_matrix();
    let scale = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let (basis, decision) = null_space(&a, scale, ZERO_SV_REL);
    decision.require_gap("G2 stabilizer", MIN_GAP)?;
    let h = Subspace::from_orthonormal(basis);
    if h.dim() != 14 {
        return Err(Error::Dimension { what: "3-form stabilizer".into(), got: h.dim(), expected: 14 });
    }
    Ok(h)
}

/// Returns `(e, t_h, n)`: labelled Cartan basis of so(7), a Cartan of `h`,
/// and the unit normal spanning `t ∩ m`.
pub fn adapt_cartan(h: &Subspace) -> Result<(DMatrix<f64>, Subspace, DVector<f64>)> {
    // Centralizer in h of a generic element of h is a maximal torus of h.
    let x = &h.basis * generic_vector(h.dim(), "g2-generic");
    let adx = ad_matrix(&x);
    let scale = adx.norm();
    let (null, decision) = null_space(&(&adx * &h.basis), scale, ZERO_SV_REL);
    decision.require_gap("centralizer in h", MIN_GAP)?;
    if null.ncols() != 2 {
        return Err(Error::Dimension { what: "maximal torus of h".into(), got: null.ncols(), expected: 2 });
    }
    let t_h = Subspace::from_orthonormal(&h.basis * null);

    // Its centralizer in so(7) is a Cartan subalgebra t.
    let mut stacked = DMatrix::zeros(2 * DIM, DIM);
    for k in 0..2 {
        stacked.view_mut((k * DIM, 0), (DIM, DIM)).copy_from(&ad_matrix(&t_h.basis.column(k).into_owned()));
    }
    let scale = stacked.norm();
    let (tb, decision) = null_space(&stacked, scale, ZERO_SV_REL);
    decision.require_gap("centralizer of t_h", MIN_GAP)?;
    if tb.ncols() != 3 {
        return Err(Error::Dimension {
            what: "abelian extension of the torus of h".into(),
            got: tb.ncols(),
            expected: 3,
        });
    }
    let t = Subspace::from_orthonormal(tb);

    // Weight planes of t on R^7 give e1, e2, e3 as unit rotation generators.
    let xg = to_matrix(&(&t.basis * generic_vector(3, "cartan-generic")));
    let sq = xg * xg;
    let (vals, vecs) = sorted_symmetric_eigen(&DMatrix::from_fn(7, 7, |r, c| sq[(r, c)]));
    let runs = cluster_sorted(&vals, CLUSTER_TOL * vals[0].abs().max(1.0));
    let sizes: Vec<usize> = runs.iter().map(|r| r.1).collect();
    if sizes != [2, 2, 2, 1] && sizes.iter().filter(|&&s| s == 2).count() != 3 {
        return Err(Error::Numerical(format!("degenerate weight spectrum on R^7: clusters {sizes:?}")));
    }
    let mut gens: Vec<DVector<f64>> = Vec::new();
    for &(start, len) in &runs {
        if len != 2 {
            continue;
        }
        let a = nalgebra::SVector::<f64, 7>::from_fn(|r, _| vecs[(r, start)]);
        let xa = xg * a;
        let b = xa / xa.norm();
        let rot = b * a.transpose() - a * b.transpose();
        gens.push(to_coords(&rot));
    }

    let mut comp = DMatrix::zeros(2, 3);
    for k in 0..2 {
        for j in 0..3 {
            comp[(k, j)] = t_h.basis.column(k).dot(&gens[j]);
        }
    }
    let (nc, _) = null_space(&comp, 1.0, ZERO_SV_REL);
    let mut n = DVector::zeros(DIM);
    for j in 0..3 {
        n += &gens[j] * nc[(j, 0)];
    }
    n /= n.norm();
    n *= lex_sign(n.as_slice(), 1e-8);

    let third = 1.0 / 3f64.sqrt();
    for g in gens.iter_mut() {
        let c = g.dot(&n);
        if (c.abs() - third).abs() > 1e-8 {
            return Err(Error::Numerical(format!("t ∩ m is not along e1+e2+e3: component {c:.12}")));
        }
        if c < 0.0 {
            *g = -g.clone();
        }
    }
    gens.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b.iter()) {
            if (x - y).abs() > 1e-9 {
                return y.total_cmp(x);
            }
        }
        std::cmp::Ordering::Equal
    });
    let e = DMatrix::from_columns(&gens);
    if t.residual(&e.column(0).into_owned()) > 1e-8 {
        return Err(Error::Numerical("rotation generators left the Cartan subalgebra".into()));
    }
    Ok((e, t_h, n))
}

/// Positive roots and adapted plane bases, in the order of `POSITIVE_ROOTS`.
pub fn root_decomposition(e: &DMatrix<f64>) -> Result<Vec<RootDatum>> {
    let ads: Vec<DMatrix<f64>> = (0..3).map(|k| ad_matrix(&e.column(k).into_owned())).collect();
    let mix = &ads[0] * GENERIC_CARTAN[0] + &ads[1] * GENERIC_CARTAN[1] + &ads[2] * GENERIC_CARTAN[2];
    let sq = &mix * &mix;
    let (vals, vecs) = sorted_symmetric_eigen(&((&sq + sq.transpose()) * 0.5));
    let runs = cluster_sorted(&vals, CLUSTER_TOL);
    let mut found: Vec<RootDatum> = Vec::new();
    let mut zero_dim = 0;
    for (start, len) in runs {
        match len {
            2 => {
                let u = vecs.column(start).into_owned();
                let w = &mix * &u;
                let mut v = &w / w.norm();
                let mut root = [0.0; 3];
                for k in 0..3 {
                    root[k] = (&ads[k] * &u).dot(&v);
                }
                if lex_sign(&root, 1e-6) < 0.0 {
                    v = -v;
                    root = root.map(|r| -r);
                }
                let label = POSITIVE_ROOTS
                    .iter()
                    .copied()
                    .min_by(|a, b| root_gap(&root, a).total_cmp(&root_gap(&root, b)))
                    .expect("non-empty");
                if root_gap(&root, &label) > 1e-6 {
                    return Err(Error::Numerical(format!("unrecognized root {root:?}")));
                }
                found.push(RootDatum { label, root, u, v });
            }
            3 if vals[start].abs() < CLUSTER_TOL => zero_dim = 3,
            _ => {
                return Err(Error::Numerical(format!(
                    "eigenvalue clustering failed: run of {len} at {:.3e}",
                    vals[start]
                )))
            }
        }
    }
    if zero_dim != 3 || found.len() != 9 {
        return Err(Error::Dimension { what: "positive roots of so(7)".into(), got: found.len(), expected: 9 });
    }
    let mut ordered = Vec::with_capacity(9);
    for label in POSITIVE_ROOTS {
        let pos = found
            .iter()
            .position(|r| r.label == label)
            .ok_or_else(|| Error::Numerical(format!("root {label:?} missing")))?;
        ordered.push(found.swap_remove(pos));
    }
    Ok(ordered)
}

fn root_gap(root: &[f64; 3], label: &[i32; 3]) -> f64 {
    root.iter().zip(label).map(|(r, &l)| (r - l as f64).abs()).fold(0.0, f64::max)
}

pub fn find_root<'a>(roots: &'a [RootDatum], label: [i32; 3]) -> &'a RootDatum {
    roots.iter().find(|r| r.label == label).expect("all positive roots are present")
}

pub fn build_sp2_in_so7(e: &DMatrix<f64>, roots: &[RootDatum]) -> Subspace {
    let mut cols = vec![e.column(0).into_owned(), e.column(1).into_owned()];
    for label in [[1, 0, 0], [0, 1, 0], [1, 1, 0], [1, -1, 0]] {
        let r = find_root(roots, label);
        cols.push(r.u.clone());
        cols.push(r.v.clone());
    }
    Subspace::from_orthonormal(DMatrix::from_columns(&cols))
}

/// Image under `Phi` of a quaternionic element of the Cartan `diag(a i, b i)`.
fn cartan_image(q: &QMat2, e: &DMatrix<f64>) -> DVector<f64> {
    let t1 = QMat2::diag(Quaternion::I, Quaternion::ZERO);
    let t2 = QMat2::diag(Quaternion::ZERO, Quaternion::I);
    let a = q.half_trace_inner(&t1) / t1.half_trace_inner(&t1);
    let b = q.half_trace_inner(&t2) / t2.half_trace_inner(&t2);
    let e1 = e.column(0).into_owned();
    let e2 = e.column(1).into_owned();
    (&e1 + &e2) * a + (&e1 - &e2) * b
}

/// Matches a quaternionic root pair `(p, p')` with `[x, p] = rate p'` onto the
/// adapted plane basis of `root`, fixing the scale through `[p, p']`.
fn match_plane(p: &QMat2, pp: &QMat2, root: &RootDatum, e: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let target = cartan_image(&p.commutator(pp), e);
    let uv = bracket(&root.u, &root.v);
    let c2 = target.dot(&uv) / uv.dot(&uv);
    if c2 <= 0.0 || (&uv * c2 - &target).norm() > 1e-9 * target.norm().max(1.0) {
        return Err(Error::Numerical(format!("root plane {:?} does not match its quaternionic partner", root.label)));
    }
    let c = c2.sqrt();
    Ok((&root.u * c, &root.v * c))
}

pub fn build_iso_phi(e: &DMatrix<f64>, roots: &[RootDatum]) -> Result<IsoPhi> {
    let (z, i, j, k, one) = (Quaternion::ZERO, Quaternion::I, Quaternion::J, Quaternion::K, Quaternion::ONE);
    let off = |q: Quaternion| QMat2::new(z, q, -q.conj(), z);
    let t1 = QMat2::diag(i, z);
    let t2 = QMat2::diag(z, i);
    // Simple roots: e2 <-> rate a - b on span{E(1), E(i)}; e1 - e2 <-> rate
    // 2b on span{diag(0, j), diag(0, k)}.
    let (a, ap) = (off(one), off(i));
    let (b, bp) = (QMat2::diag(z, j), QMat2::diag(z, k));
    let (ia, iap) = match_plane(&a, &ap, find_root(roots, [0, 1, 0]), e)?;
    let (ib, ibp) = match_plane(&b, &bp, find_root(roots, [1, -1, 0]), e)?;

    let mut pairs: Vec<(QMat2, DVector<f64>)> = vec![
        (t1, cartan_image(&t1, e)),
        (t2, cartan_image(&t2, e)),
        (a, ia),
        (ap, iap),
        (b, ib),
        (bp, ibp),
    ];
    // Extend through two rounds of brackets with the generators.
    let gens = pairs.clone();
    for _ in 0..2 {
        let current = pairs.clone();
        for (x, ix) in &gens {
            for (y, iy) in &current {
                let q = x.commutator(y);
                if q.max_abs() > 1e-12 {
                    pairs.push((q, bracket(ix, iy)));
                }
            }
        }
    }
    let n = pairs.len();
    let xq = DMatrix::from_fn(sp2::DIM, n, |r, c| sp2::to_coords(&pairs[c].0)[r]);
    let yo = DMatrix::from_fn(DIM, n, |r, c| pairs[c].1[r]);
    let xxt = &xq * xq.transpose();
    let inv = xxt
        .try_inverse()
        .ok_or_else(|| Error::Numerical("bracket extension does not span sp(2)".into()))?;
    let matrix = &yo * xq.transpose() * inv;
    let gram = matrix.transpose() * &matrix;
    let lambda = (0..sp2::DIM).map(|d| gram[(d, d)]).sum::<f64>() / sp2::DIM as f64;
    let phi = IsoPhi { matrix, lambda };
    let defect = phi_homomorphism_defect(&phi);
    if defect > 1e-9 {
        return Err(Error::Numerical(format!("Phi homomorphism defect {defect:.3e} after refinement")));
    }
    Ok(phi)
}

/// `max |Phi[b_i, b_j] - [Phi b_i, Phi b_j]|` over basis pairs.
pub fn phi_homomorphism_defect(phi: &IsoPhi) -> f64 {
    let basis = sp2::basis();
    let mut worst: f64 = 0.0;
    for bi in basis {
        for bj in basis {
            let lhs = phi.apply_matrix(&bi.commutator(bj));
            let rhs = bracket(&phi.apply_matrix(bi), &phi.apply_matrix(bj));
            worst = worst.max((lhs - rhs).amax());
        }
    }
    worst
}

/// Largest relative deviation of `Phi^T Phi` from `lambda * I`.
pub fn phi_pullback_variation(phi: &IsoPhi) -> f64 {
    let gram = phi.matrix.transpose() * &phi.matrix;
    (gram - DMatrix::<f64>::identity(sp2::DIM, sp2::DIM) * phi.lambda).amax() / phi.lambda
}

impl Structure {
    pub fn build() -> Result<Self> {
        let h = build_g2()?;
        let m = h.orthogonal_complement();
        let (e, t_h, n) = adapt_cartan(&h)?;
        let roots = root_decomposition(&e)?;
        let sp2 = build_sp2_in_so7(&e, &roots);
        let phi = build_iso_phi(&e, &roots)?;
        Ok(Self { h, m, e, t_h, n, roots, sp2, phi })
    }

    pub fn e_k(&self, k: usize) -> DVector<f64> {
        self.e.column(k).into_owned()
    }

    /// `sum c_k e_k`.
    pub fn cartan(&self, c: [f64; 3]) -> DVector<f64> {
        &self.e * DVector::from_row_slice(&c)
    }

    pub fn root(&self, label: [i32; 3]) -> &RootDatum {
        find_root(&self.roots, label)
    }

    pub fn project_h(&self, u: &DVector<f64>) -> DVector<f64> {
        self.h.project(u)
    }

    pub fn project_m(&self, u: &DVector<f64>) -> DVector<f64> {
        u - self.h.project(u)
    }

    pub fn to_file(&self) -> StructureFile {
        let cols = |m: &DMatrix<f64>| m.column_iter().map(|c| c.iter().copied().collect()).collect();
        StructureFile {
            schema_version: STRUCTURE_SCHEMA_VERSION.into(),
            h: cols(&self.h.basis),
            m: cols(&self.m.basis),
            e: cols(&self.e),
            t_h: cols(&self.t_h.basis),
            n: self.n.iter().copied().collect(),
            roots: self
                .roots
                .iter()
                .map(|r| RootRecord {
                    label: r.label,
                    root: r.root,
                    u: r.u.iter().copied().collect(),
                    v: r.v.iter().copied().collect(),
                })
                .collect(),
            sp2: cols(&self.sp2.basis),
            phi: cols(&self.phi.matrix),
            lambda: self.phi.lambda,
        }
    }

    pub fn from_file(f: &StructureFile) -> Result<Self> {
        if f.schema_version != STRUCTURE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "structure file schema {} (expected {STRUCTURE_SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        let mat = |cols: &Vec<Vec<f64>>, want: usize, what: &str| -> Result<DMatrix<f64>> {
            if cols.len() != want || cols.iter().any(|c| c.len() != DIM) {
                return Err(Error::Config(format!("structure file: bad shape for {what}")));
            }
            Ok(DMatrix::from_fn(DIM, want, |r, c| cols[c][r]))
        };
        let vec = |v: &Vec<f64>, what: &str| -> Result<DVector<f64>> {
            if v.len() != DIM {
                return Err(Error::Config(format!("structure file: bad shape for {what}")));
            }
            Ok(DVector::from_column_slice(v))
        };
        if f.roots.len() != 9 {
            return Err(Error::Config("structure file: expected 9 roots".into()));
        }
        let roots = f
            .roots
            .iter()
            .map(|r| Ok(RootDatum { label: r.label, root: r.root, u: vec(&r.u, "root u")?, v: vec(&r.v, "root v")? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            h: Subspace::from_orthonormal(mat(&f.h, 14, "h")?),
            m: Subspace::from_orthonormal(mat(&f.m, 7, "m")?),
            e: mat(&f.e, 3, "e")?,
            t_h: Subspace::from_orthonormal(mat(&f.t_h, 2, "t_h")?),
            n: vec(&f.n, "n")?,
            roots,
            sp2: Subspace::from_orthonormal(mat(&f.sp2, 10, "sp2")?),
            phi: IsoPhi { matrix: mat(&f.phi, 10, "phi")?, lambda: f.lambda },
        })
    }
}

/// Serialized form of `Structure` (column lists in so(7) coordinates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureFile {
    pub schema_version: String,
    pub h: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub t_h: Vec<Vec<f64>>,
    pub n: Vec<f64>,
    pub roots: Vec<RootRecord>,
    pub sp2: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    pub label: [i32; 3],
    pub root: [f64; 3],
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Thresholds of the structure suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureTolerances {
    /// Bracket closure, Jacobi and ad-invariance defects.
    pub closure: f64,
    /// Root coordinates and root lengths.
    pub root: f64,
    /// Phi homomorphism defect and pullback variation.
    pub phi: f64,
    /// Root-plane bracket relations.
    pub bracket_relation: f64,
    /// Principal-angle tolerance for subspace intersections.
    pub intersection: f64,
}

impl Default for StructureTolerances {
    fn default() -> Self {
        Self { closure: 1e-10, root: 1e-9, phi: 1e-9, bracket_relation: 1e-10, intersection: 1e-8 }
    }
}

impl StructureTolerances {
    pub fn uniform(tol: f64) -> Self {
        Self { closure: tol, root: tol, phi: tol, bracket_relation: tol, intersection: tol }
    }
}

/// Largest norm of the component of `[a_i, a_j]` orthogonal to `space`.
pub fn closure_defect(space: &Subspace) -> f64 {
    let b = &space.basis;
    let mut worst: f64 = 0.0;
    for i in 0..b.ncols() {
        for j in i + 1..b.ncols() {
            let br = bracket(&b.column(i).into_owned(), &b.column(j).into_owned());
            worst = worst.max(space.residual(&br));
        }
    }
    worst
}

/// Maximal violation of `[x, u] = <x, alpha> v`, `[x, v] = -<x, alpha> u` over
/// the given Cartan samples.
pub fn root_relation_defect(u: &DVector<f64>, v: &DVector<f64>, alpha: &DVector<f64>, xs: &[DVector<f64>]) -> f64 {
    xs.iter()
        .map(|x| {
            let a = x.dot(alpha);
            let d1 = (bracket(x, u) - v * a).amax();
            let d2 = (bracket(x, v) + u * a).amax();
            d1.max(d2)
        })
        .fold(0.0, f64::max)
}

fn cartan_samples(s: &Structure, count: usize, name: &str, restrict_to_h: bool) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| {
            let g = generic_vector(3, &format!("{name}-{i}"));
            if restrict_to_h {
                &s.t_h.basis * g.rows(0, 2)
            } else {
                &s.e * g
            }
        })
        .collect()
}

pub fn verify_so7(tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/so7", "Lemma 1");
    r.equal("dimension", DIM, 21);
    r.less("jacobi_defect", jacobi_defect(), tol.closure);
    let mut anti: f64 = 0.0;
    let mut adinv: f64 = 0.0;
    let rng = RngHandle::new(STRUCTURE_SEED).split_named("ad-invariance");
    for t in 0..50 {
        let vs: Vec<DVector<f64>> = (0..3).map(|k| {
            use rand::Rng;
            let mut g = rng.split(3 * t + k).rng();
            DVector::from_fn(DIM, |_, _| g.random_range(-1.0..1.0))
        }).collect();
        anti = anti.max((bracket(&vs[0], &vs[1]) + bracket(&vs[1], &vs[0])).amax());
        let inv = bi_inner(&bracket(&vs[0], &vs[1]), &vs[2]) + bi_inner(&vs[1], &bracket(&vs[0], &vs[2]));
        adinv = adinv.max(inv.abs());
    }
    r.less("antisymmetry_defect", anti, tol.closure);
    r.less("ad_invariance_defect", adinv, tol.closure);
    r
}

pub fn verify_g2(s: &Structure, tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/g2", "Lemma 1");
    let a = three_form_action_matrix();
    let scale = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let (_, decision) = null_space(&a, scale, ZERO_SV_REL);
    r.equal("stabilizer_dimension", DIM - decision.rank, 14);
    r.greater("stabilizer_gap", decision.gap, MIN_GAP);
    r.equal("h_dimension", s.h.dim(), 14);
    r.equal("m_dimension", s.m.dim(), 7);
    r.less("h_orthonormality_defect", s.h.orthonormality_defect(), tol.closure);
    r.less("closure_defect", closure_defect(&s.h), tol.closure);
    r.less("three_form_annihilation", (&a * &s.h.basis).amax(), tol.closure);
    let cross = (s.h.basis.transpose() * &s.m.basis).amax();
    r.less("h_m_cross_gram", cross, 1e-12);
    // [h, m] ⊂ m.
    let mut reductive: f64 = 0.0;
    for i in 0..s.h.dim() {
        for j in 0..s.m.dim() {
            let br = bracket(&s.h.basis.column(i).into_owned(), &s.m.basis.column(j).into_owned());
            reductive = reductive.max(s.h.project(&br).amax());
        }
    }
    r.less("reductivity_defect", reductive, tol.closure);
    r.less_eq("zero_in_h_residual", s.h.residual(&DVector::zeros(DIM)), 0.0);
    r
}

pub fn verify_cartan(s: &Structure, tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/cartan", "Lemma 1");
    let t = Subspace::from_orthonormal(s.e.clone());
    r.less("e_orthonormality_defect", t.orthonormality_defect(), tol.closure);
    let mut abelian: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            abelian = abelian.max(bracket(&s.e_k(i), &s.e_k(j)).amax());
        }
    }
    r.less("abelian_defect", abelian, 1e-12);
    r.equal("dim_t_cap_h", t.intersection(&s.h, tol.intersection).dim(), 2);
    r.equal("dim_t_cap_m", t.intersection(&s.m, tol.intersection).dim(), 1);
    let diff = DMatrix::from_columns(&[s.cartan([1.0, -1.0, 0.0]), s.cartan([0.0, 1.0, -1.0])]);
    let (span, _) = Subspace::span_of(&diff, 1e-10);
    r.less("t_cap_h_vs_e1-e2_e2-e3", span.distance(&s.t_h).unwrap_or(f64::INFINITY), tol.root);
    let sum = s.cartan([1.0, 1.0, 1.0]) / 3f64.sqrt();
    r.less("t_cap_m_vs_e1+e2+e3", (sum - &s.n).amax(), tol.root);
    r.less("t_h_inside_h", (0..2).map(|k| s.h.residual(&s.t_h.basis.column(k).into_owned())).fold(0.0, f64::max), tol.closure);
    r
}

pub fn verify_roots(s: &Structure, tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/roots", "Lemma 1");
    r.equal("positive_roots", s.roots.len(), 9);
    let coord_dev = s.roots.iter().map(|d| root_gap(&d.root, &d.label)).fold(0.0, f64::max);
    r.less("root_coordinate_deviation", coord_dev, tol.root);
    let mut short_dev: f64 = 0.0;
    let mut long_dev: f64 = 0.0;
    let mut shorts = 0;
    let mut longs = 0;
    for d in &s.roots {
        let len = d.root.iter().map(|x| x * x).sum::<f64>().sqrt();
        if d.label.iter().filter(|&&l| l != 0).count() == 1 {
            shorts += 1;
            short_dev = short_dev.max((len - 1.0).abs());
        } else {
            longs += 1;
            long_dev = long_dev.max((len - 2f64.sqrt()).abs());
        }
    }
    r.equal("short_roots", shorts, 3);
    r.equal("long_roots", longs, 6);
    r.less("short_length_deviation", short_dev, tol.root);
    r.less("long_length_deviation", long_dev, tol.root);
    let xs = cartan_samples(s, 20, "root-relation", false);
    let rel = s.roots.iter().map(|d| root_relation_defect(&d.u, &d.v, &d.root_vector(&s.e), &xs)).fold(0.0, f64::max);
    r.less("bracket_relation_defect", rel, tol.bracket_relation);
    // Planes are mutually orthogonal and orthogonal to t.
    let mut all = vec![s.e.clone()];
    all.extend(s.roots.iter().map(|d| d.plane().basis));
    let cols: Vec<DVector<f64>> = all.iter().flat_map(|m| m.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>()).collect();
    let full = Subspace::from_orthonormal(DMatrix::from_columns(&cols));
    r.less("plane_orthogonality_defect", full.orthonormality_defect(), 1e-10);
    r.equal("decomposition_dimension", full.dim(), DIM);
    r
}

/// Root decomposition of `h` over `t ∩ h`, expressed over `e1, e2, e3`.
pub fn h_roots(s: &Structure) -> Result<Vec<[f64; 3]>> {
    let hb = &s.h.basis;
    let t0 = s.t_h.basis.column(0).into_owned();
    let t1 = s.t_h.basis.column(1).into_owned();
    let restrict = |x: &DVector<f64>| hb.transpose() * ad_matrix(x) * hb;
    let (a0, a1) = (restrict(&t0), restrict(&t1));
    let mix = &a0 * 1.0 + &a1 * 0.4142;
    let sq = &mix * &mix;
    let (vals, vecs) = sorted_symmetric_eigen(&((&sq + sq.transpose()) * 0.5));
    let mut out = Vec::new();
    for (start, len) in cluster_sorted(&vals, CLUSTER_TOL) {
        if vals[start].abs() < CLUSTER_TOL {
            if len != 2 {
                return Err(Error::Dimension { what: "Cartan of h".into(), got: len, expected: 2 });
            }
            continue;
        }
        if len != 2 {
            return Err(Error::Numerical(format!("h root clustering failed: run of {len}")));
        }
        let u = vecs.column(start).into_owned();
        let w = &mix * &u;
        let v = &w / w.norm();
        let c0 = (&a0 * &u).dot(&v);
        let c1 = (&a1 * &u).dot(&v);
        let root = &t0 * c0 + &t1 * c1;
        out.push([0, 1, 2].map(|k| root.dot(&s.e_k(k))));
    }
    Ok(out)
}

/// The root system of G2 inside `t ∩ h`: `e_i - e_j` and `(e1+e2+e3)/3 - e_i`.
pub fn expected_h_roots() -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..3 {
        for j in i + 1..3 {
            let mut r = [0.0; 3];
            r[i] = 1.0;
            r[j] = -1.0;
            out.push(r);
        }
        let mut r = [1.0 / 3.0; 3];
        r[i] -= 1.0;
        out.push(r);
    }
    out
}

/// Largest distance from a computed root (up to sign) to the expected set,
/// and from each expected root to the computed set.
pub fn h_root_set_deviation(found: &[[f64; 3]]) -> f64 {
    let dist = |a: &[f64; 3], b: &[f64; 3]| {
        let p = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let m = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        p.min(m)
    };
    let expected = expected_h_roots();
    let one = found.iter().map(|f| expected.iter().map(|e| dist(f, e)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let two = expected.iter().map(|e| found.iter().map(|f| dist(f, e)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one.max(two)
}

pub fn verify_lemma1(s: &Structure, tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/lemma1", "Lemma 1");
    let it = tol.intersection;
    let name = |l: [i32; 3]| {
        let mut out = String::new();
        for (k, &c) in l.iter().enumerate() {
            if c != 0 {
                out.push_str(if c > 0 { if out.is_empty() { "" } else { "+" } } else { "-" });
                out.push_str(&format!("e{}", k + 1));
            }
        }
        out
    };
    // (1) root planes of e_i - e_j lie in h.
    for l in [[1, -1, 0], [1, 0, -1], [0, 1, -1]] {
        let p = s.root(l).plane();
        r.equal(&format!("(1) dim g[{}] ∩ h", name(l)), p.intersection(&s.h, it).dim(), 2);
    }
    // (2) g[e_i+e_j] + g[e_k] splits into 2 + 2 between h and m, and the h part
    // is the h root plane of (e_i + e_j - 2 e_k)/3.
    let xs = cartan_samples(s, 20, "lemma1-h", true);
    for (ij, k) in [([1, 1, 0], 2usize), ([1, 0, 1], 1), ([0, 1, 1], 0)] {
        let mut ek = [0; 3];
        ek[k] = 1;
        let w = s.root(ij).plane().sum(&s.root(ek).plane());
        let hw = w.intersection(&s.h, it);
        let mw = w.intersection(&s.m, it);
        let tag = format!("{}+{}", name(ij), name(ek));
        r.equal(&format!("(2) dim W[{tag}]"), w.dim(), 4);
        r.equal(&format!("(2) dim h ∩ W[{tag}]"), hw.dim(), 2);
        r.equal(&format!("(2) dim m ∩ W[{tag}]"), mw.dim(), 2);
        if hw.dim() == 2 {
            let mut beta = [0.0; 3];
            for q in 0..3 {
                beta[q] = ij[q] as f64 / 3.0 - if q == k { 2.0 / 3.0 } else { 0.0 };
            }
            let alpha = s.cartan(beta);
            let u = hw.basis.column(0).into_owned();
            let x0 = &xs[0];
            let mut v = bracket(x0, &u) / x0.dot(&alpha);
            v /= v.norm();
            if bracket(x0, &u).dot(&v) * x0.dot(&alpha) < 0.0 {
                v = -v;
            }
            let defect = root_relation_defect(&u, &v, &alpha, &xs);
            r.less(&format!("(2) h-root-plane relation [{tag}]"), defect, tol.bracket_relation);
        }
    }
    // (3) and (4).
    for (sub, label) in [(&s.h, "h"), (&s.m, "m")] {
        let part = if label == "h" { "(3)" } else { "(4)" };
        for l in [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1]] {
            let p = s.root(l).plane();
            r.equal(&format!("{part} dim {label} ∩ g[{}]", name(l)), p.intersection(sub, it).dim(), 0);
        }
    }
    match h_roots(s) {
        Ok(found) => {
            r.equal("h positive roots", found.len(), 6);
            r.less("h root set deviation", h_root_set_deviation(&found), tol.root);
        }
        Err(e) => r.fail(format!("h root decomposition failed: {e}")),
    }
    r
}

pub fn verify_sp2(s: &Structure, tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/sp2", "Lemma 7");
    r.equal("dimension", s.sp2.dim(), 10);
    r.less("orthonormality_defect", s.sp2.orthonormality_defect(), tol.closure);
    r.less("closure_defect", closure_defect(&s.sp2), tol.closure);
    let cap = s.sp2.intersection(&s.h, tol.intersection);
    r.equal("dim sp2 ∩ h", cap.dim(), 3);
    let r12 = s.root([1, -1, 0]);
    let expected = DMatrix::from_columns(&[s.cartan([1.0, -1.0, 0.0]) / 2f64.sqrt(), r12.u.clone(), r12.v.clone()]);
    let d = Subspace::from_orthonormal(expected).distance(&cap).unwrap_or(f64::INFINITY);
    r.less("sp2 ∩ h vs R(e1-e2) + g[e1-e2]", d, tol.root);
    r
}

pub fn verify_phi(s: &Structure, tol: &StructureTolerances) -> VerificationReport {
    let mut r = VerificationReport::new("structure/phi", "Theorem 2");
    let phi = &s.phi;
    r.less("homomorphism_defect", phi_homomorphism_defect(phi), tol.phi);
    r.less("pullback_relative_variation", phi_pullback_variation(phi), tol.phi);
    r.info("lambda", phi.lambda);
    let image_residual = (0..sp2::DIM)
        .map(|k| s.sp2.residual(&phi.matrix.column(k).into_owned()))
        .fold(0.0, f64::max);
    r.less("image_inside_sp2", image_residual, tol.phi);
    let pv = phi.apply(&sp2::v_coords());
    let e1 = s.e_k(0);
    let along = pv.dot(&e1);
    r.less("phi(v) collinearity with e1", (&pv - &e1 * along).amax() / along.abs(), tol.phi);
    r.info("phi(v) / e1", along);
    let z = Quaternion::ZERO;
    let second: Vec<DVector<f64>> = [Quaternion::I, Quaternion::J, Quaternion::K]
        .iter()
        .map(|&q| phi.apply_matrix(&QMat2::diag(z, q)))
        .collect();
    let (img, _) = Subspace::span_of(&DMatrix::from_columns(&second), 1e-10);
    let cap = s.sp2.intersection(&s.h, tol.intersection);
    r.less("phi(diag(0, Im H)) vs sp2 ∩ h", img.distance(&cap).unwrap_or(f64::INFINITY), tol.phi);
    // Quaternionic root planes over span{diag(i, 0), diag(0, i)} land on the
    // so(7) root planes of the matching labels.
    let off = |q: Quaternion| QMat2::new(z, q, -q.conj(), z);
    let planes = [
        ([0, 1, 0], off(Quaternion::ONE), off(Quaternion::I)),
        ([1, 0, 0], off(Quaternion::J), off(Quaternion::K)),
        ([1, 1, 0], QMat2::diag(Quaternion::J, z), QMat2::diag(Quaternion::K, z)),
        ([1, -1, 0], QMat2::diag(z, Quaternion::J), QMat2::diag(z, Quaternion::K)),
    ];
    let worst = planes
        .iter()
        .map(|(label, a, b)| {
            let m = DMatrix::from_columns(&[phi.apply_matrix(a), phi.apply_matrix(b)]);
            let (img, _) = Subspace::span_of(&m, 1e-10);
            img.distance(&s.root(*label).plane()).unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    r.less("phi(root planes) vs so(7) root planes", worst, tol.phi);
    r
}

/// All structure sub-reports, in pipeline order.
pub fn verify_structure(s: &Structure, tol: &StructureTolerances) -> Vec<VerificationReport> {
    vec![
        verify_so7(tol),
        verify_g2(s, tol),
        verify_cartan(s, tol),
        verify_roots(s, tol),
        verify_lemma1(s, tol),
        verify_sp2(s, tol),
        verify_phi(s, tol),
    ]
}
