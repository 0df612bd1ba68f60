//! Acceptance criteria 1-6. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cwlab::config::RunConfig;
use cwlab::geodesy::{build_gamma, cw_displacement_experiment, ShootParams};
use cwlab::harness::{self, RunReport};
use cwlab::metric::{build_metric, orbit_survey};
use cwlab::report::{Relation, Status, VerificationReport};
use cwlab::rng::RngHandle;
use cwlab::so7::Structure;
use cwlab::sp2;

const SEED: u64 = 42;

// Criterion 1.
const ROOT_TOL: f64 = 1e-9;
const CLOSURE_TOL: f64 = 1e-10;
const PHI_TOL: f64 = 1e-9;
const STRUCTURE_BUDGET: Duration = Duration::from_secs(30);
// Criterion 2.
const CK_SAMPLES: usize = 10_000;
const CK_ACCEPT: f64 = 1e-9;
const CK_REJECT: f64 = 1e-2;
const CK_BUDGET: Duration = Duration::from_secs(120);
// Criterion 3.
const ORBIT_SAMPLES: usize = 500;
const ORBIT_SEEDS: u64 = 3;
const ORBIT_GAP: f64 = 1e4;
const ORBIT_MAX_RANK: usize = 8;
const ORBIT_BUDGET: Duration = Duration::from_secs(60);
// Criterion 4.
const ORACLE_TOL: f64 = 1e-4;
const ORACLE_TARGETS: usize = 50;
const ENERGY_TOL: f64 = 1e-9;
const ORDER: f64 = 4.0;
const ORDER_TOL: f64 = 0.3;
const GEODESY_BUDGET: Duration = Duration::from_secs(300);
// Criterion 5.
const CW_S: [f64; 2] = [0.95, 1.05];
const CW_N: usize = 1;
const CW_SAMPLES: usize = 40;
const CW_SPREAD: f64 = 1e-3;
const CW_MATCH: f64 = 1e-3;
const CW_BUDGET: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    failures: Vec<String>,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { failures: Vec::new(), details: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.details.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn budget(&mut self, elapsed: Duration, budget: Duration) {
        self.require(elapsed < budget, format!("runtime {:.1} s < {} s", elapsed.as_secs_f64(), budget.as_secs()));
    }
}

/// Measured value of the asserted (non-informational) check `name`.
fn asserted(r: &VerificationReport, name: &str) -> f64 {
    r.checks
        .iter()
        .find(|c| c.name == name && c.relation != Relation::Info)
        .unwrap_or_else(|| panic!("{}: no asserted check {name:?}", r.suite))
        .measured
}

fn find<'a>(reports: &'a [VerificationReport], name: &str) -> &'a VerificationReport {
    reports.iter().find(|r| r.suite == name).unwrap_or_else(|| panic!("missing suite {name}"))
}

fn s_tag(s: f64) -> String {
    format!("s={s:.4}")
}

fn criterion_1(st: &Structure, cfg: &RunConfig, o: &mut Outcome) {
    let start = Instant::now();
    let built = Structure::build();
    let reports = harness::structure_reports(st, cfg);
    let elapsed = start.elapsed();
    o.require(built.is_ok(), "structure builds");
    for r in &reports {
        o.require(r.status == Status::Pass, format!("{} passes", r.suite));
    }
    let roots = find(&reports, "structure/roots");
    o.require(asserted(roots, "positive_roots") == 9.0, "9 positive roots");
    o.require(asserted(roots, "short_roots") == 3.0 && asserted(roots, "long_roots") == 6.0, "3 short + 6 long roots");
    for name in ["root_coordinate_deviation", "short_length_deviation", "long_length_deviation"] {
        let d = asserted(roots, name);
        o.require(d < ROOT_TOL, format!("{name} {d:.2e} < {ROOT_TOL:.0e}"));
    }
    let g2 = find(&reports, "structure/g2");
    o.require(asserted(g2, "stabilizer_dimension") == 14.0, "G2 dimension 14");
    let cd = asserted(g2, "closure_defect");
    o.require(cd < CLOSURE_TOL, format!("G2 closure defect {cd:.2e} < {CLOSURE_TOL:.0e}"));
    let l1 = find(&reports, "structure/lemma1");
    let dims = l1.checks.iter().filter(|c| c.relation == Relation::Equal).count();
    o.require(l1.status == Status::Pass && dims > 0, format!("all {dims} intersection dimensions reproduced"));
    let sp = find(&reports, "structure/sp2");
    o.require(asserted(sp, "dimension") == 10.0 && asserted(sp, "dim sp2 ∩ h") == 3.0, "sp(2) dim 10, sp(2) ∩ h dim 3");
    let phi = find(&reports, "structure/phi");
    let hd = asserted(phi, "homomorphism_defect");
    let pv = asserted(phi, "pullback_relative_variation");
    o.require(hd < PHI_TOL, format!("Phi homomorphism defect {hd:.2e} < {PHI_TOL:.0e}"));
    o.require(pv < PHI_TOL, format!("Phi pullback variation {pv:.2e} < {PHI_TOL:.0e}"));
    o.budget(elapsed, STRUCTURE_BUDGET);
}

fn criterion_2(st: &Structure, cfg: &RunConfig, o: &mut Outcome) {
    let mut cfg = cfg.clone();
    cfg.ck.samples = CK_SAMPLES;
    let start = Instant::now();
    let reports = harness::ck_reports(st, &cfg);
    let elapsed = start.elapsed();
    for r in &reports {
        o.require(r.status == Status::Pass, format!("{} passes", r.suite));
    }
    let s7 = find(&reports, "ck/s7");
    let sp = asserted(s7, "e1: relative spread");
    let mean = asserted(s7, "e1: mean");
    o.require(sp < CK_ACCEPT, format!("S7 e1 spread {sp:.2e} < {CK_ACCEPT:.0e}"));
    o.require((mean - 1.0 / 3.0).abs() < CK_ACCEPT, format!("S7 e1 mean {mean:.15} = 1/3 +- {CK_ACCEPT:.0e}"));
    let neg = asserted(s7, "e1+e2 (negative control): relative spread");
    o.require(neg > CK_REJECT, format!("S7 e1+e2 spread {neg:.2e} > {CK_REJECT:.0e}"));
    let (mut worst_pos, mut worst_mean, mut min_neg) = (0.0f64, 0.0f64, f64::INFINITY);
    for &s in &cfg.s_values {
        let d = find(&reports, &format!("ck/so7-deformed[{}]", s_tag(s)));
        worst_pos = worst_pos.max(asserted(d, "e1: relative spread"));
        let p = find(&reports, &format!("ck/sp2[{}]", s_tag(s)));
        worst_pos = worst_pos.max(asserted(p, "v: relative spread"));
        let ratio = asserted(p, "v: mean / (lambda <v,v>_1)");
        let expected = (2.0 + s) / 3.0;
        worst_mean = worst_mean.max((ratio - expected).abs() / expected);
        if s != 1.0 {
            min_neg = min_neg.min(asserted(d, "e1+e2 (negative control): relative spread"));
            min_neg = min_neg.min(asserted(p, "diag(j, 0) (negative control): relative spread"));
        }
    }
    o.require(worst_pos < CK_ACCEPT, format!("max positive spread over s {worst_pos:.2e} < {CK_ACCEPT:.0e}"));
    o.require(worst_mean < CK_ACCEPT, format!("sp(2) mean vs (2+s)/3 relative {worst_mean:.2e} < {CK_ACCEPT:.0e}"));
    o.require(min_neg > CK_REJECT, format!("min negative-control spread {min_neg:.2e} > {CK_REJECT:.0e}"));
    o.budget(elapsed, CK_BUDGET);
}

fn criterion_3(st: &Structure, s_values: &[f64], o: &mut Outcome) {
    let start = Instant::now();
    let bi = orbit_survey(st, 1.0, ORBIT_SAMPLES, &RngHandle::new(SEED)).expect("orbit survey at s = 1");
    o.require(bi.dim_ks == 10, format!("dim k_1 = {}", bi.dim_ks));
    for &s in s_values.iter().filter(|&&s| s != 1.0) {
        let surveys: Vec<_> = (0..ORBIT_SEEDS)
            .map(|k| orbit_survey(st, s, ORBIT_SAMPLES, &RngHandle::new(SEED + k)).expect("orbit survey"))
            .collect();
        let o0 = &surveys[0];
        o.require(o0.dim_ks == 6 && o0.ks_gap > ORBIT_GAP, format!("s={s}: dim k_s = {} (gap {:.1e})", o0.dim_ks, o0.ks_gap));
        o.require(o0.dim_c == 4, format!("s={s}: dim c = {}", o0.dim_c));
        o.require(o0.dim_intersection == 2, format!("s={s}: dim (c ∩ k_s) = {}", o0.dim_intersection));
        let maxima: Vec<usize> = surveys.iter().map(|x| x.max_rank_over_samples).collect();
        o.require(
            maxima.iter().all(|&m| m == ORBIT_MAX_RANK),
            format!("s={s}: max orbit rank over {ORBIT_SAMPLES} samples = {maxima:?}, expected {ORBIT_MAX_RANK}"),
        );
        o.require(maxima.iter().all(|&m| m < 10), format!("s={s}: max orbit rank {maxima:?} < 10"));
        o.require(maxima.windows(2).all(|w| w[0] == w[1]), format!("s={s}: maxima agree across {ORBIT_SEEDS} seeds"));
    }
    o.budget(start.elapsed(), ORBIT_BUDGET);
}

fn criterion_4(st: &Structure, cfg: &RunConfig, o: &mut Outcome) {
    let mut cfg = cfg.clone();
    cfg.geodesy.oracle_targets = ORACLE_TARGETS;
    cfg.geodesy.oracle_tol = ORACLE_TOL;
    cfg.geodesy.energy_tol = ENERGY_TOL;
    cfg.geodesy.order_target = ORDER;
    cfg.geodesy.order_tol = ORDER_TOL;
    let start = Instant::now();
    let reports = harness::geodesy_reports(st, &cfg);
    let elapsed = start.elapsed();
    let oracle = find(&reports, "geodesy/oracle");
    o.require(oracle.status == Status::Pass, "geodesy/oracle passes");
    for name in ["pi/6", "pi/3", "2pi/3", "0.9pi"] {
        let got = asserted(oracle, &format!("exp({name} v): shooting length (normalized)"));
        let want = asserted(oracle, &format!("oracle(exp({name} v))"));
        o.require((got - want).abs() < ORACLE_TOL, format!("exp({name} v): |{got:.9} - {want:.9}| < {ORACLE_TOL:.0e}"));
    }
    let worst = asserted(oracle, &format!("{ORACLE_TARGETS} random targets: max |shooting - oracle|"));
    o.require(worst < ORACLE_TOL, format!("{ORACLE_TARGETS} random targets: max deviation {worst:.2e} < {ORACLE_TOL:.0e}"));
    let integ = find(&reports, "geodesy/integrator");
    let drift = asserted(integ, "s=1.1 energy drift over T = pi");
    o.require(drift < ENERGY_TOL, format!("energy drift {drift:.2e} < {ENERGY_TOL:.0e}"));
    let order = asserted(integ, "step-halving convergence order");
    o.require((order - ORDER).abs() <= ORDER_TOL, format!("step-halving order {order:.3} = {ORDER} +- {ORDER_TOL}"));
    o.budget(elapsed, GEODESY_BUDGET);
}

fn criterion_5(st: &Structure, o: &mut Outcome) {
    let start = Instant::now();
    let gamma = build_gamma(CW_N).expect("Gamma");
    let angles: Vec<f64> = gamma.non_identity().map(|(t, _)| t).collect();
    o.require(
        angles.len() == 2 && angles.iter().all(|t| (t.abs() - 2.0 * PI / 3.0).abs() < 1e-15),
        format!("Gamma(n=1) non-identity reduced angles {angles:?}"),
    );
    let rng = RngHandle::new(SEED).split_named("cw");
    for s in CW_S {
        let m = build_metric(s, st).expect("metric");
        for &t0 in &angles {
            let e = cw_displacement_experiment(&m, t0, &sp2::v_matrix(), "v", CW_SAMPLES, &rng, &ShootParams::default())
                .expect("displacement experiment");
            let predicted = t0.abs() * ((2.0 + s) / 3.0).sqrt();
            let worst = e.rows.iter().map(|r| (r.displacement - predicted).abs() / predicted).fold(0.0, f64::max);
            let tag = format!("s={s}, t0={t0:+.6}");
            o.require(e.rows.len() == CW_SAMPLES && e.all_converged, format!("{tag}: {CW_SAMPLES} converged samples"));
            o.require(e.relative_spread < CW_SPREAD, format!("{tag}: spread {:.2e} < {CW_SPREAD:.0e}", e.relative_spread));
            o.require(worst < CW_MATCH, format!("{tag}: max deviation from t0 sqrt((2+s)/3) {worst:.2e} < {CW_MATCH:.0e}"));
        }
    }
    // The conjunction: the same s values must carry the orbit certificate.
    let mut orbit = Outcome::new();
    criterion_3(st, &CW_S, &mut orbit);
    let orbit_failures: Vec<String> = orbit.failures.into_iter().filter(|f| !f.starts_with("runtime")).collect();
    o.require(
        orbit_failures.is_empty(),
        format!("orbit certificate (criterion 3) at s in {CW_S:?}{}", if orbit_failures.is_empty() { String::new() } else { format!(": {}", orbit_failures.join("; ")) }),
    );
    o.budget(start.elapsed(), CW_BUDGET);
}

/// Every suite, kept small so two full runs fit in a test.
const DETERMINISM_CONFIG: &str = "\
seed = 42
s_values = 0.95, 1, 1.05
ck.samples = 1000
ck.restriction_samples = 50
orbit.samples = 100
geodesy.restarts = 10
geodesy.oracle_targets = 5
geodesy.injectivity_pairs = 500
cw.samples = 3
cw.negative_samples = 3
";

fn strip_volatile(json: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(json).expect("report JSON");
    v["config"]["jobs"] = serde_json::Value::Null;
    for suite in v["suites"].as_array_mut().expect("suites") {
        suite["wall_time_s"] = serde_json::Value::Null;
    }
    serde_json::to_string(&v).unwrap()
}

fn criterion_6(o: &mut Outcome) {
    let bin = env!("CARGO_BIN_EXE_cwlab");
    let root = tempfile::tempdir().expect("tempdir");
    let run = |name: &str, jobs: &str| -> (String, RunReport) {
        let dir = root.path().join(name);
        std::fs::create_dir(&dir).unwrap();
        std::fs::write(dir.join("run.cfg"), DETERMINISM_CONFIG).unwrap();
        let status = Command::new(bin)
            .args(["report-all", "--config", "run.cfg", "--seed", "42", "--jobs", jobs, "--out", "report.json"])
            .current_dir(&dir)
            .output()
            .expect("spawn cwlab");
        assert!(matches!(status.status.code(), Some(0 | 1)), "report-all failed: {status:?}");
        let text = std::fs::read_to_string(Path::new(&dir).join("report.json")).unwrap();
        let report = serde_json::from_str(&text).unwrap();
        (text, report)
    };
    let (ta, ra) = run("a", "1");
    let (tb, rb) = run("b", "2");
    let mut values = 0usize;
    let mut mismatches = Vec::new();
    for (x, y) in ra.suites.iter().zip(&rb.suites) {
        if x.suite != y.suite || x.checks.len() != y.checks.len() || x.status != y.status {
            mismatches.push(x.suite.clone());
            continue;
        }
        for (cx, cy) in x.checks.iter().zip(&y.checks) {
            values += 1;
            if cx.measured.to_bits() != cy.measured.to_bits() {
                mismatches.push(format!("{}: {}", x.suite, cx.name));
            }
        }
    }
    o.require(ra.suites.len() == rb.suites.len() && !ra.suites.is_empty(), format!("{} suites in both runs", ra.suites.len()));
    o.require(mismatches.is_empty(), format!("{values} measured values bitwise identical (jobs 1 vs 2){}", if mismatches.is_empty() { String::new() } else { format!("; differing: {mismatches:?}") }));
    o.require(strip_volatile(&ta) == strip_volatile(&tb), "JSON identical apart from wall-time and worker count");
}

fn main() -> ExitCode {
    let cfg = RunConfig { seed: SEED, ..RunConfig::default() };
    let st = Structure::build().expect("structure");
    let criteria: [(&str, Box<dyn Fn(&mut Outcome)>); 6] = [
        ("structure suite", Box::new(|o| criterion_1(&st, &cfg, o))),
        ("CK suite", Box::new(|o| criterion_2(&st, &cfg, o))),
        ("orbit suite", Box::new(|o| criterion_3(&st, &cfg.s_values, o))),
        ("geodesy oracle suite", Box::new(|o| criterion_4(&st, &cfg, o))),
        ("counterexample experiment", Box::new(|o| criterion_5(&st, o))),
        ("determinism", Box::new(criterion_6)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let mut o = Outcome::new();
        let t = Instant::now();
        run(&mut o);
        let verdict = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {} ({name}): {verdict} [{:.1} s, {} checks]", k + 1, t.elapsed().as_secs_f64(), o.details.len() + o.failures.len());
        for f in &o.failures {
            println!("    failed: {f}");
        }
        if !o.failures.is_empty() {
            failed += 1;
        }
    }
    println!("acceptance: {} of 6 criteria pass", 6 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
