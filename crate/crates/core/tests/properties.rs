use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;

use cwlab::ck::CkStatistic;
use cwlab::geodesy::{euler_arnold_rhs, reduce_angle};
use cwlab::metric::{build_metric, MetricGram};
use cwlab::quat::{eigenangles, embed_c4, is_sp2_group, qmat_exp, retract_to_sp2, QMat2, Quaternion};
use cwlab::rng::RngHandle;
use cwlab::so7::{self, Structure};
use cwlab::sp2::{self, Vec10};

fn structure() -> &'static Structure {
    static S: OnceLock<Structure> = OnceLock::new();
    S.get_or_init(|| Structure::build().unwrap())
}

fn metric(s: f64) -> MetricGram {
    build_metric(s, structure()).unwrap()
}

fn quat() -> impl Strategy<Value = Quaternion> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
}

fn unit_quat() -> impl Strategy<Value = Quaternion> {
    quat().prop_filter("nonzero", |q| q.norm() > 1e-3).prop_map(|q| q.scale(1.0 / q.norm()))
}

fn group() -> impl Strategy<Value = QMat2> {
    any::<u64>().prop_map(|seed| sp2::random_sp2(&RngHandle::new(seed)))
}

fn coords(scale: f64) -> impl Strategy<Value = Vec10> {
    proptest::collection::vec(-scale..scale, 10).prop_map(|v| Vec10::from_column_slice(&v))
}

fn so7_vec() -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(-1.0..1.0f64, so7::DIM).prop_map(DVector::from_vec)
}

fn deformation() -> impl Strategy<Value = f64> {
    0.3..3.0f64
}

fn qdist(a: Quaternion, b: Quaternion) -> f64 {
    (a - b).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quaternion_product_is_associative(a in unit_quat(), b in unit_quat(), c in unit_quat()) {
        prop_assert!(qdist((a * b) * c, a * (b * c)) < 1e-15);
    }

    #[test]
    fn quaternion_conjugation_reverses_products(a in quat(), b in quat()) {
        prop_assert!(qdist((a * b).conj(), b.conj() * a.conj()) < 1e-14);
    }

    #[test]
    fn quaternion_norm_is_multiplicative(a in quat(), b in quat()) {
        prop_assert!(((a * b).norm() - a.norm() * b.norm()).abs() < 1e-13);
    }

    #[test]
    fn conj_transpose_reverses_products(a in group(), b in group()) {
        prop_assert!(((a * b).conj_transpose() - b.conj_transpose() * a.conj_transpose()).max_abs() < 1e-14);
    }

    #[test]
    fn complex_embedding_is_multiplicative(a in group(), b in group()) {
        let d = embed_c4(&(a * b)) - embed_c4(&a) * embed_c4(&b);
        prop_assert!(d.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn sampled_elements_are_symplectic(g in group()) {
        prop_assert!(is_sp2_group(&g, 1e-12));
        prop_assert!((g * g.sp2_inverse() - QMat2::identity()).max_abs() < 1e-12);
    }

    #[test]
    fn exponential_is_a_one_parameter_group(u in coords(1.0), s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let x = sp2::from_coords(&u);
        let lhs = qmat_exp(&x.scale(s)).unwrap() * qmat_exp(&x.scale(t)).unwrap();
        let rhs = qmat_exp(&x.scale(s + t)).unwrap();
        prop_assert!((lhs - rhs).max_abs() < 1e-12);
        prop_assert!(is_sp2_group(&rhs, 1e-12));
    }

    #[test]
    fn eigenangles_are_conjugation_invariant(h in group(), g in group()) {
        let (a, b) = eigenangles(&h).unwrap();
        let (c, d) = eigenangles(&(g.sp2_inverse() * h * g)).unwrap();
        prop_assert!(PI >= a && a >= b && b >= 0.0);
        prop_assert!((a - c).abs() < 1e-7 && (b - d).abs() < 1e-7, "{a} {b} vs {c} {d}");
    }

    #[test]
    fn eigenangles_of_gamma_type_elements(t in 0.01..(PI - 0.01)) {
        let g = qmat_exp(&sp2::v_matrix().scale(t)).unwrap();
        let (a, b) = eigenangles(&g).unwrap();
        prop_assert!((a - t).abs() < 1e-9 && (b - t).abs() < 1e-9);
    }

    #[test]
    fn retraction_fixes_group_elements(g in group()) {
        prop_assert!((retract_to_sp2(&g).unwrap() - g).max_abs() < 1e-14);
    }

    #[test]
    fn retraction_lands_on_the_group(g in group(), e in coords(1.0), eps in 1e-9..1e-4f64) {
        // Symmetric perturbation: orthogonal to the algebra at the identity.
        let x = sp2::from_coords(&e);
        let sym = QMat2::identity() + (x * x).scale(eps);
        let r = retract_to_sp2(&(g * sym)).unwrap();
        prop_assert!(is_sp2_group(&r, 1e-12));
    }

    #[test]
    fn sp2_bracket_is_a_lie_bracket(x in coords(1.0), y in coords(1.0), z in coords(1.0)) {
        prop_assert!((sp2::bracket(&x, &y) + sp2::bracket(&y, &x)).amax() < 1e-14);
        let jac = sp2::bracket(&x, &sp2::bracket(&y, &z))
            + sp2::bracket(&y, &sp2::bracket(&z, &x))
            + sp2::bracket(&z, &sp2::bracket(&x, &y));
        prop_assert!(jac.amax() < 1e-12);
        let direct = sp2::to_coords(&sp2::from_coords(&x).commutator(&sp2::from_coords(&y)));
        prop_assert!((direct - sp2::bracket(&x, &y)).amax() < 1e-13);
    }

    #[test]
    fn so7_form_is_ad_invariant(x in so7_vec(), u in so7_vec(), w in so7_vec()) {
        let d = so7::bi_inner(&so7::bracket(&x, &u), &w) + so7::bi_inner(&u, &so7::bracket(&x, &w));
        prop_assert!(d.abs() < 1e-12);
    }

    #[test]
    fn phi_is_a_scaled_isometric_homomorphism(x in coords(1.0), y in coords(1.0)) {
        let phi = &structure().phi;
        let lhs = phi.apply(&sp2::bracket(&x, &y));
        let rhs = so7::bracket(&phi.apply(&x), &phi.apply(&y));
        prop_assert!((lhs - rhs).amax() < 1e-9);
        let ip = so7::bi_inner(&phi.apply(&x), &phi.apply(&y));
        prop_assert!((ip - phi.lambda * x.dot(&y)).abs() < 1e-9 * (1.0 + ip.abs()));
    }

    #[test]
    fn projections_split_so7_orthogonally(u in so7_vec(), w in so7_vec()) {
        let st = structure();
        prop_assert!(so7::bi_inner(&st.project_h(&u), &st.project_m(&w)).abs() < 1e-12);
        prop_assert!((st.project_h(&u) + st.project_m(&u) - &u).amax() < 1e-12);
    }

    #[test]
    fn euler_arnold_preserves_energy(u in coords(2.0), s in deformation()) {
        let m = metric(s);
        let r = euler_arnold_rhs(&u, &m);
        prop_assert!(m.inner(&r, &u).abs() < 1e-12 * (1.0 + m.norm_sq(&u)));
    }

    #[test]
    fn euler_arnold_vanishes_for_bi_invariant_and_for_v(u in coords(2.0), s in deformation()) {
        prop_assert!(euler_arnold_rhs(&u, &metric(1.0)).amax() < 1e-12);
        prop_assert!(euler_arnold_rhs(&(sp2::v_coords() * 1.7), &metric(s)).amax() < 1e-10);
    }

    #[test]
    fn v_has_constant_length_along_its_adjoint_orbit(g in group(), s in deformation()) {
        let m = metric(s);
        let v = sp2::v_matrix();
        let w = sp2::to_coords(&(g * v * g.sp2_inverse()));
        let expected = (2.0 + s) / 3.0 * m.lambda * sp2::v_coords().norm_squared();
        prop_assert!((m.norm_sq(&w) - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn metric_is_positive_and_symmetric(s in deformation(), u in coords(1.0)) {
        let m = metric(s);
        prop_assert!((&m.g - m.g.transpose()).amax() < 1e-12);
        prop_assert!(m.min_eigenvalue() > 0.0);
        prop_assert!(m.norm_sq(&u) >= 0.0);
    }

    #[test]
    fn reduced_angles_lie_in_half_open_circle(t in -50.0..50.0f64) {
        let r = reduce_angle(t);
        prop_assert!(-PI < r && r <= PI);
        let k = ((t - r) / (2.0 * PI)).round();
        prop_assert!((t - r - 2.0 * PI * k).abs() < 1e-12);
    }

    #[test]
    fn statistic_orders_its_summaries(values in proptest::collection::vec(0.1..10.0f64, 1..200)) {
        let st = CkStatistic::from_values(&values, 0);
        prop_assert!(st.min <= st.mean * (1.0 + 1e-15) && st.mean <= st.max * (1.0 + 1e-15));
        prop_assert!(st.relative_spread >= 0.0);
        prop_assert_eq!(st.sample_count, values.len());
    }

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), i in any::<u64>()) {
        use rand::RngCore;
        let a = RngHandle::new(seed).split(i).rng().next_u64();
        let b = RngHandle::new(seed).split(i).rng().next_u64();
        prop_assert_eq!(a, b);
    }
}
