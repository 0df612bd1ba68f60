//! Verification suites and the versioned run report.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ck::{self, CkStatistic, Verdict};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geodesy::{self, CwExperiment, IntegratorOptions, ShootParams};
use crate::linalg::Subspace;
use crate::metric::{self, MetricGram, MetricParts};
use crate::quat::{eigenangles, qmat_exp, QMat2, Quaternion};
use crate::report::{timed, VerificationReport};
use crate::rng::RngHandle;
use crate::so7::{self, Structure, StructureFile};
use crate::sp2::{self, Vec10};

pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub suites: Vec<VerificationReport>,
}

impl RunReport {
    /// Suites are ordered by name so the document does not depend on
    /// scheduling.
    pub fn new(config: &RunConfig, mut suites: Vec<VerificationReport>) -> Self {
        suites.sort_by(|a, b| a.suite.cmp(&b.suite));
        Self { schema_version: REPORT_SCHEMA_VERSION.into(), config: config.clone(), suites }
    }

    pub fn passed(&self) -> bool {
        self.suites.iter().all(|r| r.passed())
    }

    pub fn suite(&self, name: &str) -> Option<&VerificationReport> {
        self.suites.iter().find(|r| r.suite == name)
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Loads the structure file when it exists, otherwise builds the structure
/// (and saves it when a path is configured).
pub fn obtain_structure(cfg: &RunConfig) -> Result<Structure> {
    match &cfg.structure_file {
        Some(path) if path.exists() => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            let file: StructureFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Structure::from_file(&file)
        }
        Some(path) => {
            let s = Structure::build()?;
            write_file(path, &serde_json::to_string_pretty(&s.to_file())?)?;
            Ok(s)
        }
        None => Structure::build(),
    }
}

fn failed(suite: &str, lemma: &str, err: &Error) -> VerificationReport {
    let mut r = VerificationReport::new(suite, lemma);
    r.fail(err.to_string());
    r
}

fn with_seed(r: VerificationReport, seed: u64) -> VerificationReport {
    r.with_seed(seed)
}

fn s_tag(s: f64) -> String {
    format!("s={s:.4}")
}

pub fn structure_reports(s: &Structure, cfg: &RunConfig) -> Vec<VerificationReport> {
    let tol = &cfg.structure;
    vec![
        timed(|| so7::verify_so7(tol)),
        timed(|| so7::verify_g2(s, tol)),
        timed(|| so7::verify_cartan(s, tol)),
        timed(|| so7::verify_roots(s, tol)),
        timed(|| so7::verify_lemma1(s, tol)),
        timed(|| so7::verify_sp2(s, tol)),
        timed(|| so7::verify_phi(s, tol)),
    ]
}

/// Adds the checks shared by all CK statistics and applies the verdict
/// bands; `positive` selects whether constancy is expected.
fn ck_case(r: &mut VerificationReport, label: &str, stat: &CkStatistic, positive: bool, cfg: &RunConfig) {
    r.info(&format!("{label}: mean"), stat.mean);
    if positive {
        r.less(&format!("{label}: relative spread"), stat.relative_spread, cfg.ck.accept_spread);
    } else {
        r.greater(&format!("{label}: relative spread"), stat.relative_spread, cfg.ck.negative_min_spread);
    }
    let verdict = if stat.sample_count < ck::MIN_SAMPLES {
        Verdict::Inconclusive
    } else if stat.relative_spread < cfg.ck.accept_spread {
        Verdict::Constant
    } else if stat.relative_spread > cfg.ck.reject_spread {
        Verdict::NonConstant
    } else {
        Verdict::Inconclusive
    };
    if verdict == Verdict::Inconclusive {
        r.mark_inconclusive(format!(
            "{label}: spread {:.3e} over {} samples is not decisive (needs >= {} samples and a spread outside [{:.0e}, {:.0e}])",
            stat.relative_spread,
            stat.sample_count,
            ck::MIN_SAMPLES,
            cfg.ck.accept_spread,
            cfg.ck.reject_spread
        ));
    }
}

fn ck_s7(s: &Structure, cfg: &RunConfig, rng: &RngHandle) -> Result<VerificationReport> {
    let mut r = VerificationReport::new("ck/s7", "Lemma 3");
    let n = cfg.ck.samples;
    let e1 = s.e_k(0);
    let pos = ck::ck_statistic_s7(s, &e1, n, &rng.split_named("e1"))?;
    ck_case(&mut r, "e1", &pos, true, cfg);
    r.within("e1: mean", pos.mean, 1.0 / 3.0, cfg.ck.mean_tol);
    let zero = ck::ck_statistic_s7(s, &nalgebra::DVector::zeros(so7::DIM), n.min(100), &rng.split_named("zero"))?;
    r.within("0: mean", zero.mean, 0.0, 0.0);
    let neg = ck::ck_statistic_s7(s, &(&e1 + s.e_k(1)), n, &rng.split_named("e1+e2"))?;
    ck_case(&mut r, "e1+e2 (negative control)", &neg, false, cfg);
    Ok(r)
}

fn ck_sp2(st: &Structure, parts: &MetricParts, sv: f64, cfg: &RunConfig, rng: &RngHandle) -> Result<VerificationReport> {
    let mut r = VerificationReport::new(format!("ck/sp2[{}]", s_tag(sv)), "Lemma 6");
    let m = MetricGram::from_parts(sv, parts)?;
    let n = cfg.ck.samples;
    let v = sp2::v_matrix();
    let pos = ck::ck_statistic_sp2(&m, &v, n, &rng.split_named("v"))?;
    ck_case(&mut r, "v", &pos, true, cfg);
    let expected = (2.0 + sv) / 3.0 * m.lambda;
    r.within("v: mean / (lambda <v,v>_1)", pos.mean / m.lambda, (2.0 + sv) / 3.0, cfg.ck.mean_tol * (2.0 + sv) / 3.0);
    r.info("v: expected mean (Gram units)", expected);
    // Ad(h) v generates a constant-length field with the same length.
    let h = sp2::random_sp2(&rng.split_named("conjugator"));
    let vh = h * v * h.sp2_inverse();
    let conj = ck::ck_statistic_sp2(&m, &vh, n.min(1000), &rng.split_named("Ad(h)v"))?;
    r.less("Ad(h)v: |mean - mean(v)|", (conj.mean - pos.mean).abs(), 1e-10);
    if sv != 1.0 {
        let neg = ck::ck_statistic_sp2(&m, &QMat2::diag(Quaternion::J, Quaternion::ZERO), n, &rng.split_named("neg"))?;
        ck_case(&mut r, "diag(j, 0) (negative control)", &neg, false, cfg);
    } else {
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let u = sp2::random_sp2_algebra(&rng.split_named("random-v").split(k));
            let st = ck::ck_statistic_sp2(&m, &u, n.min(500), &rng.split_named("random-v-samples").split(k))?;
            worst = worst.max(st.relative_spread);
        }
        r.less("20 random generators: max relative spread", worst, 1e-12);
    }
    let rc = ck::restriction_consistency(st, &m, &v, cfg.ck.restriction_samples, &rng.split_named("restriction"))?;
    r.less("restriction through Phi: max relative deviation", rc, cfg.ck.restriction_tol);
    Ok(r)
}

fn ck_so7_deformed(st: &Structure, sv: f64, cfg: &RunConfig, rng: &RngHandle) -> Result<VerificationReport> {
    let mut r = VerificationReport::new(format!("ck/so7-deformed[{}]", s_tag(sv)), "Lemma 4");
    let n = cfg.ck.samples;
    let e1 = st.e_k(0);
    let pos = ck::ck_statistic_so7_deformed(st, &e1, sv, n, &rng.split_named("e1"))?;
    ck_case(&mut r, "e1", &pos, true, cfg);
    r.within("e1: mean", pos.mean, (2.0 + sv) / 3.0, cfg.ck.mean_tol * (2.0 + sv) / 3.0);
    if sv != 1.0 {
        let neg = ck::ck_statistic_so7_deformed(st, &(&e1 + st.e_k(1)), sv, n, &rng.split_named("e1+e2"))?;
        ck_case(&mut r, "e1+e2 (negative control)", &neg, false, cfg);
    }
    Ok(r)
}

fn observation1(cfg: &RunConfig) -> VerificationReport {
    let mut r = VerificationReport::new("ck/observation1", "Observation 1");
    let ts = [-2.5, -0.7, 0.3, 1.0, 2.9];
    let z = Quaternion::ZERO;
    let cases = [
        ("diag(j, j)", QMat2::diag(Quaternion::J, Quaternion::J), 0.0),
        ("diag(exp(0.4 i), exp(-1.1 i))", QMat2::diag(Quaternion::I.scale(0.4).exp(), Quaternion::I.scale(-1.1).exp()), 1.0),
        ("Id", QMat2::identity(), 1.0),
        ("E(i)", QMat2::new(z, Quaternion::I, Quaternion::I, z), 1.0),
        ("E(j)", QMat2::new(z, Quaternion::J, Quaternion::J, z), 0.0),
    ];
    for (label, u, commutes) in cases {
        let sub = ck::observation1_check(&u, &ts, cfg.ck.observation_tol);
        for c in &sub.checks {
            if c.relation == crate::report::Relation::Info {
                r.info(&format!("{label}: {}", c.name), c.measured);
            } else {
                r.equal(&format!("{label}: {}", c.name), c.measured as usize, c.target as usize);
            }
        }
        r.within(&format!("{label}: commutes"), sub.value("(a) holds"), commutes, 0.0);
        for n in sub.notes {
            r.fail(format!("{label}: {n}"));
        }
    }
    r
}

pub fn ck_reports(st: &Structure, cfg: &RunConfig) -> Vec<VerificationReport> {
    let parts = MetricParts::new(st);
    let rng = RngHandle::new(cfg.seed).split_named("ck");
    let mut out = Vec::new();
    out.push(timed(|| ck_s7(st, cfg, &rng.split_named("s7")).unwrap_or_else(|e| failed("ck/s7", "Lemma 3", &e))));
    for &sv in &cfg.s_values {
        let rs = rng.split_named(&s_tag(sv));
        out.push(timed(|| {
            ck_sp2(st, &parts, sv, cfg, &rs.split_named("sp2"))
                .unwrap_or_else(|e| failed(&format!("ck/sp2[{}]", s_tag(sv)), "Lemma 6", &e))
        }));
        out.push(timed(|| {
            ck_so7_deformed(st, sv, cfg, &rs.split_named("so7"))
                .unwrap_or_else(|e| failed(&format!("ck/so7-deformed[{}]", s_tag(sv)), "Lemma 4", &e))
        }));
    }
    out.push(timed(|| observation1(cfg)));
    out.into_iter().map(|r| with_seed(r, cfg.seed)).collect()
}

fn metric_report(parts: &MetricParts, sv: f64) -> Result<VerificationReport> {
    let mut r = VerificationReport::new(format!("metric[{}]", s_tag(sv)), "Lemma 7");
    let m = MetricGram::from_parts(sv, parts)?;
    let g1 = MetricGram::from_parts(1.0, parts)?;
    r.greater("min eigenvalue of G_s", m.min_eigenvalue(), 0.0);
    let ident = (g1.g - sp2::Mat10::identity() * g1.lambda).amax();
    r.less("|G_1 - lambda I|", ident, 1e-10);
    r.info("lambda", m.lambda);
    let v = sp2::v_coords();
    r.within("<v,v>_s / <v,v>_1", m.norm_sq(&v) / g1.norm_sq(&v), (2.0 + sv) / 3.0, 1e-12);
    if sv == 1.0 {
        r.less("ad-invariance defect", metric::ad_invariance_defect(&m), 1e-10);
    } else {
        let ev = metric::generalized_eigenvalues(&m, &g1);
        let near_one = ev.iter().filter(|&&e| (e - 1.0).abs() < 1e-9).count();
        r.equal("multiplicity of generalized eigenvalue 1", near_one, 3);
        let extreme = if sv > 1.0 { ev[0] } else { ev[ev.len() - 1] };
        r.within("extreme generalized eigenvalue", extreme, 1.0, 1e-9);
    }
    Ok(r)
}

fn orbit_report(st: &Structure, parts: &MetricParts, sv: f64, cfg: &RunConfig) -> Result<VerificationReport> {
    let mut r = VerificationReport::new(format!("orbit[{}]", s_tag(sv)), "Lemma 7");
    let bi = sv == 1.0;
    let surveys = (0..cfg.orbit.seeds as u64)
        .map(|k| metric::orbit_survey(st, sv, cfg.orbit.samples, &RngHandle::new(cfg.seed.wrapping_add(k)).split_named("orbit")))
        .collect::<Result<Vec<_>>>()?;
    let o = &surveys[0];
    r.equal("dim c", o.dim_c, 4);
    r.equal("dim k_s", o.dim_ks, if bi { 10 } else { 6 });
    r.greater("k_s singular-value gap", o.ks_gap, cfg.orbit.min_gap);
    r.equal("dim (c ∩ k_s)", o.dim_intersection, if bi { 4 } else { 2 });
    r.equal("orbit rank at e", o.rank_at_identity, if bi { 10 } else { 8 });
    let maxima: Vec<usize> = surveys.iter().map(|x| x.max_rank_over_samples).collect();
    if bi {
        r.equal("max orbit rank over samples", o.max_rank_over_samples, 10);
    } else {
        r.less_eq("max orbit rank over samples", o.max_rank_over_samples as f64, 8.0);
        r.less("max orbit rank over samples (non-transitivity)", o.max_rank_over_samples as f64, 10.0);
    }
    r.info("sample count", o.sample_count as f64);
    r.greater("rank gap at the maximum", o.min_gap_at_max, cfg.orbit.min_gap);
    let distinct = maxima.iter().all(|&x| x == maxima[0]);
    r.equal(&format!("sampled maximum agrees across {} seeds", maxima.len()), distinct as usize, 1);

    let m = MetricGram::from_parts(sv, parts)?;
    let (ks, _) = metric::isometric_right_algebra(&m)?;
    let (c, _) = metric::centralizer_of_v();
    r.less("c vs u(2)", c.distance(&metric::complex_subalgebra()).unwrap_or(f64::INFINITY), 1e-10);
    if !bi {
        r.less("k_s vs sp(1) + sp(1)", ks.distance(&metric::diagonal_subalgebra()).unwrap_or(f64::INFINITY), 1e-9);
        r.less("k_s normalizes diag(0, Im H)", metric::normalizer_defect(&ks, &metric::second_factor()), 1e-9);
        let cap = c.intersection(&ks, 1e-8);
        r.less("c ∩ k_s vs diagonal torus", cap.distance(&metric::diagonal_torus()).unwrap_or(f64::INFINITY), 1e-9);
    }
    Ok(r)
}

/// `k_s` coincides for every tested `s != 1`.
fn ks_consistency(parts: &MetricParts, cfg: &RunConfig) -> Result<Option<VerificationReport>> {
    let spaces = cfg
        .s_values
        .iter()
        .filter(|&&s| s != 1.0)
        .map(|&s| Ok(metric::isometric_right_algebra(&MetricGram::from_parts(s, parts)?)?.0))
        .collect::<Result<Vec<Subspace>>>()?;
    if spaces.len() < 2 {
        return Ok(None);
    }
    let mut r = VerificationReport::new("orbit/ks-consistency", "Lemma 7");
    let worst = spaces[1..].iter().map(|k| k.distance(&spaces[0]).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    r.less("max distance between k_s over tested s != 1", worst, 1e-9);
    Ok(Some(r))
}

pub fn orbit_reports(st: &Structure, cfg: &RunConfig) -> Vec<VerificationReport> {
    let parts = MetricParts::new(st);
    let mut out = Vec::new();
    for &sv in &cfg.s_values {
        let tag = s_tag(sv);
        out.push(timed(|| metric_report(&parts, sv).unwrap_or_else(|e| failed(&format!("metric[{tag}]"), "Lemma 7", &e))));
        out.push(timed(|| orbit_report(st, &parts, sv, cfg).unwrap_or_else(|e| failed(&format!("orbit[{tag}]"), "Lemma 7", &e))));
    }
    match ks_consistency(&parts, cfg) {
        Ok(Some(r)) => out.push(r),
        Ok(None) => {}
        Err(e) => out.push(failed("orbit/ks-consistency", "Lemma 7", &e)),
    }
    out.into_iter().map(|r| with_seed(r, cfg.seed)).collect()
}

pub fn shoot_params(cfg: &RunConfig) -> ShootParams {
    ShootParams { restarts: cfg.geodesy.restarts, tol: cfg.geodesy.tol, ..ShootParams::default() }
}

/// Convergence order from three successive step-halvings.
pub fn step_halving_order(u0: &Vec10, m: &MetricGram, base_steps: usize) -> Result<f64> {
    let opts = IntegratorOptions { max_energy_drift: f64::INFINITY, max_membership_defect: 1e-3, ..IntegratorOptions::default() };
    let start = geodesy::GeodesicState::at_identity(*u0);
    let end = |n: usize| geodesy::geodesic_endpoint(&start, 1.0, n, m, &opts).map(|(s, _)| s);
    let (a, b, c) = (end(base_steps)?, end(2 * base_steps)?, end(4 * base_steps)?);
    let e1 = (a.g - b.g).max_abs().max((a.u - b.u).amax());
    let e2 = (b.g - c.g).max_abs().max((b.u - c.u).amax());
    Ok((e1 / e2).log2())
}

fn geodesy_oracle(st: &Structure, cfg: &RunConfig, rng: &RngHandle) -> Result<VerificationReport> {
    let mut r = VerificationReport::new("geodesy/oracle", "Lemma 9");
    let m = MetricGram::from_parts(1.0, &MetricParts::new(st))?;
    let params = shoot_params(cfg);
    let tol = cfg.geodesy.oracle_tol;
    let v = sp2::v_matrix();
    for (name, t0) in [("pi/6", PI / 6.0), ("pi/3", PI / 3.0), ("2pi/3", 2.0 * PI / 3.0), ("0.9pi", 0.9 * PI)] {
        let target = qmat_exp(&v.scale(t0))?;
        let oracle = geodesy::bi_distance_oracle(&target)?;
        r.within(&format!("oracle(exp({name} v))"), oracle, t0, 1e-12);
        let est = geodesy::shoot_distance(&target, &m, &params, &rng.split_named(name), &[])?;
        r.equal(&format!("exp({name} v): converged"), est.converged as usize, 1);
        r.within(&format!("exp({name} v): shooting length (normalized)"), est.length_normalized, oracle, tol);
    }
    let minus = QMat2::identity().scale(-1.0);
    r.within("oracle(-Id)", geodesy::bi_distance_oracle(&minus)?, PI, 1e-12);
    let est = geodesy::shoot_distance(&minus, &m, &params, &rng.split_named("-Id"), &[])?;
    r.within("-Id: shooting length (normalized)", est.length_normalized, PI, tol);
    r.within("oracle(Id)", geodesy::bi_distance_oracle(&QMat2::identity())?, 0.0, 0.0);
    let results = (0..cfg.geodesy.oracle_targets as u64)
        .map(|i| {
            let target = sp2::random_sp2(&rng.split_named("targets").split(i));
            let oracle = geodesy::bi_distance_oracle(&target)?;
            let est = geodesy::shoot_distance(&target, &m, &params, &rng.split_named("restarts").split(i), &[])?;
            Ok((est, oracle))
        })
        .collect::<Result<Vec<_>>>()?;
    let unconverged = results.iter().filter(|(e, _)| !e.converged).count();
    r.equal("random targets: unconverged", unconverged, 0);
    let worst = results.iter().map(|(e, o)| (e.length_normalized - o).abs()).fold(0.0, f64::max);
    r.less(&format!("{} random targets: max |shooting - oracle|", results.len()), worst, tol);
    r.info("random targets: largest oracle distance", results.iter().map(|x| x.1).fold(0.0, f64::max));
    let sat = results.iter().filter(|(e, _)| e.saturated).count();
    r.info("random targets: restart-saturated fraction", sat as f64 / results.len() as f64);
    // Exp_1 agrees with the matrix exponential.
    let mut worst_exp: f64 = 0.0;
    for k in 0..20 {
        let mut u = sp2::to_coords(&sp2::random_sp2_algebra(&rng.split_named("exp").split(k)));
        let radius = PI * (k as f64 + 1.0) / 20.0;
        u *= radius / u.norm();
        let a = geodesy::riemannian_exp(&u, &m)?;
        let b = qmat_exp(&sp2::from_coords(&u))?;
        worst_exp = worst_exp.max((a - b).max_abs());
    }
    r.less("Exp_1 vs matrix exponential (|u| <= pi)", worst_exp, 1e-8);
    Ok(r)
}

fn geodesy_integrator(st: &Structure, cfg: &RunConfig, rng: &RngHandle) -> Result<VerificationReport> {
    let mut r = VerificationReport::new("geodesy/integrator", "Lemma 9");
    let parts = MetricParts::new(st);
    let m1 = MetricGram::from_parts(1.0, &parts)?;
    let m11 = MetricGram::from_parts(1.1, &parts)?;
    let opts = IntegratorOptions::default();
    let t0 = 2.0 * PI / 3.0;
    let start = geodesy::GeodesicState::at_identity(sp2::v_coords());
    let (end, _) = geodesy::geodesic_endpoint(&start, t0, opts.steps_for(1.0, t0), &m1, &opts)?;
    r.less("s=1 geodesic along v vs exp(t0 v)", (end.g - qmat_exp(&sp2::v_matrix().scale(t0))?).max_abs(), 1e-8);
    let (zero, _) = geodesy::geodesic_endpoint(&start, 0.0, 4, &m1, &opts)?;
    r.less("T = 0 endpoint vs start", (zero.g - QMat2::identity()).max_abs(), 1e-15);

    let mut u = sp2::to_coords(&sp2::random_sp2_algebra(&rng.split_named("drift")));
    u *= 1.5 / u.norm();
    let lenient = IntegratorOptions { max_energy_drift: f64::INFINITY, ..opts };
    let (path, stats) = geodesy::integrate_geodesic(&geodesy::GeodesicState::at_identity(u), PI, lenient.steps_for(u.norm(), PI), &m11, &lenient)?;
    r.less("s=1.1 energy drift over T = pi", stats.energy_drift, cfg.geodesy.energy_tol);
    r.less("s=1.1 membership defect before retraction", stats.membership_defect, 1e-9);
    r.info("s=1.1 steps", path.len() as f64 - 1.0);
    let order = step_halving_order(&u, &m11, 8)?;
    r.within("step-halving convergence order", order, cfg.geodesy.order_target, cfg.geodesy.order_tol);

    // Left translation commutes with integration.
    let h = sp2::random_sp2(&rng.split_named("left"));
    let (a, _) = geodesy::geodesic_endpoint(&geodesy::GeodesicState::at_identity(u), 1.0, 64, &m11, &opts)?;
    let (b, _) = geodesy::geodesic_endpoint(&geodesy::GeodesicState { g: h, u }, 1.0, 64, &m11, &opts)?;
    r.less("left-translated curve endpoint vs h Exp(u)", (b.g - h * a.g).max_abs(), 1e-8);
    Ok(r)
}

fn geodesy_injectivity(st: &Structure, cfg: &RunConfig, rng: &RngHandle) -> Result<VerificationReport> {
    let mut r = VerificationReport::new("geodesy/injectivity", "Lemma 12");
    let parts = MetricParts::new(st);
    for (sv, radius, name) in [(1.0, 0.9 * PI, "s=1, radius 0.9pi"), (1.1, 0.5, "s=1.1, radius 0.5")] {
        let m = MetricGram::from_parts(sv, &parts)?;
        let p = geodesy::exp_injectivity_probe(&m, radius, cfg.geodesy.injectivity_pairs, &rng.split_named(name))?;
        r.info(&format!("{name}: pairs"), p.pairs_checked as f64);
        r.equal(&format!("{name}: collisions"), p.collisions, 0);
        r.info(&format!("{name}: min image separation"), p.min_image_separation);
    }
    r.note("absence of collisions is necessary, not sufficient, for injectivity");
    Ok(r)
}

pub fn geodesy_reports(st: &Structure, cfg: &RunConfig) -> Vec<VerificationReport> {
    let rng = RngHandle::new(cfg.seed).split_named("geodesy");
    vec![
        timed(|| geodesy_oracle(st, cfg, &rng.split_named("oracle")).unwrap_or_else(|e| failed("geodesy/oracle", "Lemma 9", &e))),
        timed(|| {
            geodesy_integrator(st, cfg, &rng.split_named("integrator")).unwrap_or_else(|e| failed("geodesy/integrator", "Lemma 9", &e))
        }),
        timed(|| {
            geodesy_injectivity(st, cfg, &rng.split_named("injectivity"))
                .unwrap_or_else(|e| failed("geodesy/injectivity", "Lemma 12", &e))
        }),
    ]
    .into_iter()
    .map(|r| with_seed(r, cfg.seed))
    .collect()
}

fn gamma_report(n: usize) -> Result<VerificationReport> {
    let mut r = VerificationReport::new("cw/gamma", "Theorem 2");
    let g = geodesy::build_gamma(n)?;
    r.equal("elements", g.elements.len(), 2 * n + 1);
    r.equal("generator order", g.generator_order(1e-12).unwrap_or(0), 2 * n + 1);
    r.less("closure defect", g.closure_defect(), 1e-12);
    let mut worst: f64 = 0.0;
    for (t, e) in g.non_identity() {
        let (a, b) = eigenangles(e)?;
        worst = worst.max((a - t.abs()).abs()).max((b - t.abs()).abs());
    }
    r.less("eigenangles vs reduced angles", worst, 1e-10);
    Ok(r)
}

/// The two tested `s != 1` closest to 1.
pub fn adjacent_points(s_values: &[f64]) -> Vec<f64> {
    let mut others: Vec<f64> = s_values.iter().copied().filter(|&s| s != 1.0).collect();
    others.sort_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()).then(a.total_cmp(b)));
    others.dedup();
    others.truncate(2);
    others
}

fn cw_case_report(e: &CwExperiment, cfg: &RunConfig, adjacent: bool) -> VerificationReport {
    let mut r = VerificationReport::new(format!("cw[{},t0={:+.6}]", s_tag(e.s), e.t0), "Theorem 2");
    let unconverged = e.rows.iter().filter(|x| !x.converged).count();
    r.equal("unconverged shootings", unconverged, 0);
    r.info("mean displacement (normalized)", e.mean);
    r.info("predicted |t0| sqrt((2+s)/3)", e.predicted);
    r.info("relative spread", e.relative_spread);
    r.info("restart-saturated", e.all_saturated as u8 as f64);
    let worst_abs = e.rows.iter().map(|x| (x.displacement - e.predicted).abs()).fold(0.0, f64::max);
    if e.s == 1.0 {
        r.less("relative spread (s = 1)", e.relative_spread, cfg.cw.bi_tol);
        r.less("max |displacement - t0| (s = 1)", worst_abs, cfg.cw.bi_tol);
    } else if adjacent {
        r.less("relative spread", e.relative_spread, cfg.cw.spread_tol);
        r.less("max relative deviation from prediction", worst_abs / e.predicted, cfg.cw.match_tol);
    } else {
        r.info("max relative deviation from prediction", worst_abs / e.predicted);
    }
    if !e.all_saturated {
        r.note("some samples were not restart-saturated");
    }
    r
}

/// Returns the reports and the experiments (for CSV output).
pub fn cw_reports(st: &Structure, cfg: &RunConfig) -> (Vec<VerificationReport>, Vec<CwExperiment>) {
    let parts = MetricParts::new(st);
    let rng = RngHandle::new(cfg.seed).split_named("cw");
    let params = shoot_params(cfg);
    let mut reports = vec![timed(|| gamma_report(cfg.n).unwrap_or_else(|e| failed("cw/gamma", "Theorem 2", &e)))];
    let angles: Vec<f64> = match cfg.cw.t0 {
        Some(t) => vec![t],
        None => match geodesy::build_gamma(cfg.n) {
            Ok(g) => g.non_identity().map(|(t, _)| t).collect(),
            Err(e) => {
                reports.push(failed("cw/gamma", "Theorem 2", &e));
                Vec::new()
            }
        },
    };
    let adjacent = adjacent_points(&cfg.s_values);
    let mut experiments = Vec::new();
    for &sv in &cfg.s_values {
        let Ok(m) = MetricGram::from_parts(sv, &parts) else {
            reports.push(failed(&format!("cw[{}]", s_tag(sv)), "Theorem 2", &Error::InvalidArgument("metric".into())));
            continue;
        };
        for &t0 in &angles {
            let name = format!("cw[{},t0={t0:+.6}]", s_tag(sv));
            let start = std::time::Instant::now();
            match geodesy::cw_displacement_experiment(&m, t0, &sp2::v_matrix(), "v", cfg.cw.samples, &rng.split_named(&name), &params) {
                Ok(e) => {
                    let mut r = cw_case_report(&e, cfg, adjacent.contains(&sv));
                    r.wall_time_s = start.elapsed().as_secs_f64();
                    reports.push(r);
                    experiments.push(e);
                }
                Err(e) => reports.push(failed(&name, "Theorem 2", &e)),
            }
        }
    }
    // Negative control: a direction that is not constant-length for s != 1.
    let neg_s = adjacent.iter().copied().find(|&s| s > 1.0).or_else(|| adjacent.first().copied());
    if let Some(sv) = neg_s {
        let name = format!("cw/negative[{}]", s_tag(sv));
        let w = QMat2::diag(Quaternion::J.scale(std::f64::consts::SQRT_2), Quaternion::ZERO);
        let run = || -> Result<VerificationReport> {
            let m = MetricGram::from_parts(sv, &parts)?;
            let e = geodesy::cw_displacement_experiment(
                &m,
                cfg.cw.negative_t0,
                &w,
                "sqrt(2) diag(j, 0)",
                cfg.cw.negative_samples,
                &rng.split_named(&name),
                &params,
            )?;
            let mut r = VerificationReport::new(&name, "Theorem 2");
            r.equal("unconverged shootings", e.rows.iter().filter(|x| !x.converged).count(), 0);
            r.info("mean displacement (normalized)", e.mean);
            r.greater("relative spread (control rejected)", e.relative_spread, cfg.cw.negative_min_spread);
            Ok(r)
        };
        reports.push(timed(|| run().unwrap_or_else(|e| failed(&name, "Theorem 2", &e))));
    }
    (reports.into_iter().map(|r| with_seed(r, cfg.seed)).collect(), experiments)
}

/// Structure plus every suite.
pub fn run_all(cfg: &RunConfig) -> Result<(RunReport, Vec<CwExperiment>)> {
    let st = obtain_structure(cfg)?;
    let mut suites = structure_reports(&st, cfg);
    suites.extend(ck_reports(&st, cfg));
    suites.extend(orbit_reports(&st, cfg));
    suites.extend(geodesy_reports(&st, cfg));
    let (cw, experiments) = cw_reports(&st, cfg);
    suites.extend(cw);
    Ok((RunReport::new(cfg, suites), experiments))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_sweep_points() {
        assert_eq!(adjacent_points(&crate::config::DEFAULT_SWEEP), vec![0.95, 1.05]);
        assert_eq!(adjacent_points(&[1.0, 1.2, 0.7]), vec![1.2, 0.7]);
        assert!(adjacent_points(&[1.0]).is_empty());
    }

    #[test]
    fn report_orders_suites_by_name() {
        let cfg = RunConfig::default();
        let r = RunReport::new(&cfg, vec![VerificationReport::new("b", "x"), VerificationReport::new("a", "y")]);
        assert_eq!(r.suites[0].suite, "a");
        assert_eq!(r.schema_version, "1");
    }
}
