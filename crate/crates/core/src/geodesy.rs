//! Geodesics of left-invariant metrics on Sp(2).
//!
//! A geodesic is carried as a group point `g` and a body velocity `u` (sp(2)
//! coordinates), with `g' = g u` and the Euler-Arnold equation
//! `G u' = ad(u)^T G u`. Lengths are measured in Gram units of `G_s`;
//! dividing by `sqrt(lambda)` gives half-trace-normalized units, in which the
//! bi-invariant distance is read off the eigenangles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricGram;
use crate::quat::{eigenangles, is_sp2_group, qmat_exp, qmat_log, retract_to_sp2, QMat2};
use crate::rng::RngHandle;
use crate::sp2::{self, Vec10, DIM};

/// Velocity `G^{-1} ad(u)^T G u`.
pub fn euler_arnold_rhs(u: &Vec10, metric: &MetricGram) -> Vec10 {
    let w = metric.g * u;
    let c = sp2::structure_constants();
    // (ad(u)^T w)_j = sum_{i,k} u_i c[i][j][k] w_k
    let mut out = Vec10::zeros();
    for i in 0..DIM {
        if u[i] == 0.0 {
            continue;
        }
        for j in 0..DIM {
            let row = &c[i][j];
            let mut acc = 0.0;
            for k in 0..DIM {
                acc += row[k] * w[k];
            }
            out[j] += u[i] * acc;
        }
    }
    metric.inverse() * out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicState {
    pub g: QMat2,
    pub u: Vec10,
}

impl GeodesicState {
    pub fn at_identity(u: Vec10) -> Self {
        Self { g: QMat2::identity(), u }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// RK4 steps per unit of `T * (largest eigenangle rate of u)`.
    pub steps_per_unit: f64,
    pub min_steps: usize,
    /// Polar retraction every this many steps (and at the end).
    pub retract_every: usize,
    /// Relative energy drift bound; `f64::INFINITY` disables the check.
    pub max_energy_drift: f64,
    /// Membership defect allowed before the final retraction.
    pub max_membership_defect: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { steps_per_unit: 48.0, min_steps: 8, retract_every: 16, max_energy_drift: 1e-9, max_membership_defect: 1e-9 }
    }
}

impl IntegratorOptions {
    /// Cheap settings for exploratory restarts.
    pub fn coarse() -> Self {
        Self { steps_per_unit: 12.0, min_steps: 4, max_energy_drift: 1e-6, max_membership_defect: 1e-6, ..Self::default() }
    }

    /// Step count for a trajectory of duration `t` with body velocity of
    /// coordinate norm `speed`. The largest eigenangle rate of `u` is at most
    /// `sqrt(2) |u|`.
    pub fn steps_for(&self, speed: f64, t: f64) -> usize {
        let n = (self.steps_per_unit * std::f64::consts::SQRT_2 * speed * t.abs()).ceil();
        (n as usize).max(self.min_steps)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub energy_drift: f64,
    pub membership_defect: f64,
}

fn membership_defect(g: &QMat2) -> f64 {
    (g.conj_transpose() * *g - QMat2::identity()).max_abs()
}

fn rk4_step(g: &QMat2, u: &Vec10, h: f64, metric: &MetricGram) -> (QMat2, Vec10) {
    let vel = |g: &QMat2, u: &Vec10| (*g * sp2::from_coords(u), euler_arnold_rhs(u, metric));
    let (g1, u1) = vel(g, u);
    let (g2, u2) = vel(&(*g + g1.scale(0.5 * h)), &(u + u1 * (0.5 * h)));
    let (g3, u3) = vel(&(*g + g2.scale(0.5 * h)), &(u + u2 * (0.5 * h)));
    let (g4, u4) = vel(&(*g + g3.scale(h)), &(u + u3 * h));
    let gn = *g + (g1 + g2.scale(2.0) + g3.scale(2.0) + g4).scale(h / 6.0);
    let un = u + (u1 + u2 * 2.0 + u3 * 2.0 + u4) * (h / 6.0);
    (gn, un)
}

/// Fixed-step RK4 on `(g, u)`, calling `visit` on every state (including the
/// start). Returns the endpoint and drift statistics.
fn integrate_with<F>(
    start: &GeodesicState,
    t: f64,
    steps: usize,
    metric: &MetricGram,
    opts: &IntegratorOptions,
    mut visit: F,
) -> Result<(GeodesicState, IntegrationStats)>
where
    F: FnMut(&GeodesicState),
{
    if steps == 0 {
        return Err(Error::InvalidArgument("integration needs at least one step".into()));
    }
    let e0 = metric.norm_sq(&start.u);
    let mut state = *start;
    visit(&state);
    let h = t / steps as f64;
    let mut stats = IntegrationStats { steps, ..Default::default() };
    for k in 1..=steps {
        let (g, u) = rk4_step(&state.g, &state.u, h, metric);
        state = GeodesicState { g, u };
        if k % opts.retract_every == 0 || k == steps {
            stats.membership_defect = stats.membership_defect.max(membership_defect(&state.g));
            state.g = retract_to_sp2(&state.g)?;
        }
        let drift = if e0 > 0.0 { (metric.norm_sq(&state.u) - e0).abs() / e0 } else { metric.norm_sq(&state.u) };
        stats.energy_drift = stats.energy_drift.max(drift);
        visit(&state);
    }
    if stats.energy_drift > opts.max_energy_drift {
        return Err(Error::Numerical(format!(
            "energy drift {:.3e} exceeds {:.1e} ({steps} steps)",
            stats.energy_drift, opts.max_energy_drift
        )));
    }
    if stats.membership_defect > opts.max_membership_defect {
        return Err(Error::Numerical(format!("integrator left Sp(2): defect {:.3e}", stats.membership_defect)));
    }
    Ok((state, stats))
}

/// Full path of `steps + 1` states over `[0, t]`.
pub fn integrate_geodesic(
    start: &GeodesicState,
    t: f64,
    steps: usize,
    metric: &MetricGram,
    opts: &IntegratorOptions,
) -> Result<(Vec<GeodesicState>, IntegrationStats)> {
    let mut path = Vec::with_capacity(steps + 1);
    let (_, stats) = integrate_with(start, t, steps, metric, opts, |s| path.push(*s))?;
    Ok((path, stats))
}

pub fn geodesic_endpoint(
    start: &GeodesicState,
    t: f64,
    steps: usize,
    metric: &MetricGram,
    opts: &IntegratorOptions,
) -> Result<(GeodesicState, IntegrationStats)> {
    integrate_with(start, t, steps, metric, opts, |_| {})
}

/// `Exp_s(u0)`: endpoint of the unit-time geodesic from the identity.
pub fn riemannian_exp(u0: &Vec10, metric: &MetricGram) -> Result<QMat2> {
    riemannian_exp_with(u0, metric, &IntegratorOptions::default())
}

pub fn riemannian_exp_with(u0: &Vec10, metric: &MetricGram, opts: &IntegratorOptions) -> Result<QMat2> {
    let steps = opts.steps_for(u0.norm(), 1.0);
    Ok(geodesic_endpoint(&GeodesicState::at_identity(*u0), 1.0, steps, metric, opts)?.0.g)
}

/// Bi-invariant distance from the identity in half-trace units,
/// `sqrt((theta_1^2 + theta_2^2) / 2)`.
pub fn bi_distance_oracle(g: &QMat2) -> Result<f64> {
    let (a, b) = eigenangles(g)?;
    Ok(((a * a + b * b) / 2.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootParams {
    pub restarts: usize,
    /// Bound on the max-entry endpoint defect `|target - Exp(u0)|`.
    pub tol: f64,
    pub max_iter: usize,
    pub fine: IntegratorOptions,
    pub coarse: IntegratorOptions,
    /// Improvement below which later restarts count as saturated.
    pub saturation_tol: f64,
}

impl Default for ShootParams {
    fn default() -> Self {
        Self {
            restarts: 50,
            tol: 1e-9,
            max_iter: 40,
            fine: IntegratorOptions::default(),
            coarse: IntegratorOptions::coarse(),
            saturation_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// `|u0|_s` in Gram units.
    pub length: f64,
    /// `length / sqrt(lambda)`.
    pub length_normalized: f64,
    pub endpoint_defect: f64,
    pub restarts_used: usize,
    pub converged_restarts: usize,
    pub converged: bool,
    /// No restart in the second half improved the best length by more than
    /// the saturation tolerance.
    pub saturated: bool,
    pub initial_velocity: Vec<f64>,
}

/// Skew-part coordinates of `target^{-1} Exp(u)`; vanish at a hit.
fn residual(target_inv: &QMat2, u: &Vec10, steps: usize, metric: &MetricGram, opts: &IntegratorOptions) -> Result<(Vec10, QMat2)> {
    let end = geodesic_endpoint(&GeodesicState::at_identity(*u), 1.0, steps, metric, opts)?.0.g;
    Ok((sp2::to_coords(&(*target_inv * end)), end))
}

struct Solve {
    u: Vec10,
    defect: f64,
}

/// Damped Gauss-Newton with a forward-difference Jacobian and a fixed step
/// count, so the residual map is smooth in `u`.
fn gauss_newton(
    target: &QMat2,
    start: Vec10,
    metric: &MetricGram,
    opts: &IntegratorOptions,
    params: &ShootParams,
) -> Option<Solve> {
    let target_inv = target.sp2_inverse();
    let mut u = start;
    let mut steps = opts.steps_for(u.norm() * 1.25 + 0.25, 1.0);
    let (mut f, mut end) = residual(&target_inv, &u, steps, metric, opts).ok()?;
    for _ in 0..params.max_iter {
        let defect = (*target - end).max_abs();
        if defect < params.tol {
            if opts.steps_for(u.norm(), 1.0) > steps {
                // The answer outgrew the planned resolution: re-plan and polish.
                steps = opts.steps_for(u.norm() * 1.25 + 0.25, 1.0);
                (f, end) = residual(&target_inv, &u, steps, metric, opts).ok()?;
                continue;
            }
            return Some(Solve { u, defect });
        }
        let h = 1e-7 * u.norm().max(1.0);
        let mut jac = DMatrix::zeros(DIM, DIM);
        for j in 0..DIM {
            let mut up = u;
            up[j] += h;
            let (fp, _) = residual(&target_inv, &up, steps, metric, opts).ok()?;
            jac.set_column(j, &DVector::from_column_slice(((fp - f) / h).as_slice()));
        }
        let rhs = DVector::from_column_slice(f.as_slice());
        let svd = jac.svd(true, true);
        let delta = svd.solve(&rhs, 1e-12).ok()?;
        let mut delta = Vec10::from_column_slice(delta.as_slice());
        // Trust region: never move more than one unit per iteration.
        let dn = delta.norm();
        if dn > 1.0 {
            delta /= dn;
        }
        let f0 = f.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let cand = u - delta * alpha;
            if let Ok((fc, ec)) = residual(&target_inv, &cand, steps, metric, opts) {
                let full = (*target - ec).max_abs();
                if fc.norm() < f0 || full < params.tol {
                    u = cand;
                    f = fc;
                    end = ec;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    let defect = (*target - end).max_abs();
    (defect < params.tol).then_some(Solve { u, defect })
}

/// Restart `k` of `restarts`: a perturbation of one of the structured guesses,
/// with a scale that grows across the restart schedule.
fn restart_start(guesses: &[Vec10], k: usize, restarts: usize, rng: &RngHandle) -> Vec10 {
    let base = guesses[k % guesses.len()];
    let mut r = rng.split(k as u64).rng();
    let xi = Vec10::from_fn(|_, _| r.sample::<f64, _>(StandardNormal)) / 10f64.sqrt();
    let sigma = 0.05 + 1.5 * (k as f64 / restarts.max(1) as f64);
    base + xi * sigma * (0.25 + base.norm())
}

/// `d_s(e, target)` by multi-start shooting. `hints` are extra structured
/// initial velocities (sp(2) coordinates); the principal logarithm of the
/// target is always tried first.
pub fn shoot_distance(
    target: &QMat2,
    metric: &MetricGram,
    params: &ShootParams,
    rng: &RngHandle,
    hints: &[Vec10],
) -> Result<DistanceEstimate> {
    if !is_sp2_group(target, 1e-9) {
        return Err(Error::InvalidArgument("shooting target is not in Sp(2)".into()));
    }
    let root_lambda = metric.lambda.sqrt();
    if (*target - QMat2::identity()).max_abs() < params.tol {
        return Ok(DistanceEstimate {
            length: 0.0,
            length_normalized: 0.0,
            endpoint_defect: (*target - QMat2::identity()).max_abs(),
            restarts_used: 0,
            converged_restarts: 1,
            converged: true,
            saturated: true,
            initial_velocity: vec![0.0; DIM],
        });
    }
    let mut guesses = vec![sp2::to_coords(&qmat_log(target)?)];
    guesses.extend_from_slice(hints);

    let mut best: Option<Solve> = None;
    let mut converged_restarts = 0;
    let consider = |best: &mut Option<Solve>, s: Solve| {
        if best.as_ref().is_none_or(|b| metric.norm(&s.u) < metric.norm(&b.u)) {
            *best = Some(s);
        }
    };
    // Structured guesses at full resolution.
    for g in &guesses {
        if let Some(s) = gauss_newton(target, *g, metric, &params.fine, params) {
            converged_restarts += 1;
            consider(&mut best, s);
        }
    }
    // Random restarts at coarse resolution; only improvements are polished.
    let coarse_params = ShootParams { tol: params.tol.max(1e-7), ..params.clone() };
    let coarse: Vec<Option<Vec10>> = (0..params.restarts)
        .map(|k| {
            let start = restart_start(&guesses, k, params.restarts, rng);
            gauss_newton(target, start, metric, &params.coarse, &coarse_params).map(|s| s.u)
        })
        .collect();
    let half = params.restarts / 2;
    let mut best_first_half = best.as_ref().map(|b| metric.norm(&b.u)).unwrap_or(f64::INFINITY);
    for (k, cand) in coarse.into_iter().enumerate() {
        let Some(u) = cand else { continue };
        converged_restarts += 1;
        let current = best.as_ref().map(|b| metric.norm(&b.u)).unwrap_or(f64::INFINITY);
        if metric.norm(&u) < current - params.saturation_tol {
            if let Some(s) = gauss_newton(target, u, metric, &params.fine, params) {
                consider(&mut best, s);
            }
        }
        if k + 1 == half {
            best_first_half = best.as_ref().map(|b| metric.norm(&b.u)).unwrap_or(f64::INFINITY);
        }
    }
    let restarts_used = guesses.len() + params.restarts;
    match best {
        Some(b) => {
            let length = metric.norm(&b.u);
            Ok(DistanceEstimate {
                length,
                length_normalized: length / root_lambda,
                endpoint_defect: b.defect,
                restarts_used,
                converged_restarts,
                converged: true,
                saturated: best_first_half - length <= params.saturation_tol,
                initial_velocity: b.u.iter().copied().collect(),
            })
        }
        None => Ok(DistanceEstimate {
            length: f64::NAN,
            length_normalized: f64::NAN,
            endpoint_defect: f64::INFINITY,
            restarts_used,
            converged_restarts: 0,
            converged: false,
            saturated: false,
            initial_velocity: Vec::new(),
        }),
    }
}

/// Reduces an angle into `(-pi, pi]`.
pub fn reduce_angle(t: f64) -> f64 {
    let r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// The cyclic group `{exp(2 k pi / (2n+1) v) : k = -n..n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaGroup {
    pub n: usize,
    pub elements: Vec<QMat2>,
    /// Reduced angles `t0` in `(-pi, pi)`, matching `elements`.
    pub angles: Vec<f64>,
}

pub fn build_gamma(n: usize) -> Result<GammaGroup> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gamma needs n >= 1".into()));
    }
    let order = (2 * n + 1) as f64;
    let v = sp2::v_matrix();
    let mut elements = Vec::with_capacity(2 * n + 1);
    let mut angles = Vec::with_capacity(2 * n + 1);
    for k in -(n as i64)..=(n as i64) {
        let t = reduce_angle(2.0 * PI * k as f64 / order);
        elements.push(qmat_exp(&v.scale(t))?);
        angles.push(t);
    }
    Ok(GammaGroup { n, elements, angles })
}

impl GammaGroup {
    pub fn generator(&self) -> &QMat2 {
        &self.elements[self.n + 1]
    }

    pub fn identity_index(&self) -> usize {
        self.n
    }

    /// Largest distance from a product of two elements to the group.
    pub fn closure_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.elements {
            for b in &self.elements {
                let p = *a * *b;
                let d = self.elements.iter().map(|e| (p - *e).max_abs()).fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest `m >= 1` with `generator^m = Id` within `tol`.
    pub fn generator_order(&self, tol: f64) -> Option<usize> {
        let g = *self.generator();
        let mut p = g;
        for m in 1..=4 * (2 * self.n + 1) {
            if (p - QMat2::identity()).max_abs() < tol {
                return Some(m);
            }
            p = p * g;
        }
        None
    }

    pub fn non_identity(&self) -> impl Iterator<Item = (f64, &QMat2)> {
        self.angles.iter().copied().zip(self.elements.iter()).filter(|(t, _)| *t != 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwRow {
    pub s: f64,
    pub t0: f64,
    pub sample_index: usize,
    /// Normalized units.
    pub displacement: f64,
    pub defect: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwExperiment {
    pub s: f64,
    pub t0: f64,
    /// Generator label, `v` or the negative-control direction.
    pub direction: String,
    pub rows: Vec<CwRow>,
    pub mean: f64,
    pub relative_spread: f64,
    /// `|t0| sqrt(<w, w>_s / lambda)` for the generator `w`, normalized units.
    pub predicted: f64,
    pub all_converged: bool,
    pub all_saturated: bool,
}

impl CwExperiment {
    pub fn require_converged(&self) -> Result<()> {
        if self.all_converged {
            Ok(())
        } else {
            let bad = self.rows.iter().filter(|r| !r.converged).count();
            Err(Error::NotConverged(format!(
                "{bad} of {} displacement samples at s = {}, t0 = {:.6}",
                self.rows.len(),
                self.s,
                self.t0
            )))
        }
    }
}

/// Displacement `d_s(e, g^{-1} exp(t0 w) g)` of the left translation by
/// `exp(t0 w)` at sampled points `g`.
pub fn cw_displacement_experiment(
    metric: &MetricGram,
    t0: f64,
    direction: &QMat2,
    label: &str,
    sample_count: usize,
    rng: &RngHandle,
    params: &ShootParams,
) -> Result<CwExperiment> {
    if !(t0.abs() < PI) {
        return Err(Error::InvalidArgument(format!("t0 = {t0} is outside (-pi, pi)")));
    }
    let gamma = qmat_exp(&direction.scale(t0))?;
    let w = sp2::to_coords(direction);
    let results: Vec<(DistanceEstimate, usize)> = (0..sample_count)
        .into_par_iter()
        .map(|i| {
            let r = rng.split(i as u64);
            let g = sp2::random_sp2(&r.split_named("point"));
            let gi = g.sp2_inverse();
            let target = retract_to_sp2(&(gi * gamma * g))?;
            // One-parameter-subgroup guess: t0 Ad(g^{-1}) w.
            let hint = sp2::ad_group_matrix(&gi) * w * t0;
            let est = shoot_distance(&target, metric, params, &r.split_named("restarts"), &[hint])?;
            Ok((est, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<CwRow> = results
        .iter()
        .map(|(e, i)| CwRow {
            s: metric.s,
            t0,
            sample_index: *i,
            displacement: e.length_normalized,
            defect: e.endpoint_defect,
            converged: e.converged,
        })
        .collect();
    let values: Vec<f64> = rows.iter().filter(|r| r.converged).map(|r| r.displacement).collect();
    let stat = crate::ck::CkStatistic::from_values(&values, rng.seed);
    Ok(CwExperiment {
        s: metric.s,
        t0,
        direction: label.into(),
        mean: stat.mean,
        relative_spread: stat.relative_spread,
        predicted: t0.abs() * (metric.norm_sq(&w) / metric.lambda).sqrt(),
        all_converged: rows.iter().all(|r| r.converged),
        all_saturated: results.iter().all(|(e, _)| e.saturated),
        rows,
    })
}

pub const CSV_HEADER: &str = "s,t0,sample_index,displacement,defect,converged";

pub fn cw_csv(experiments: &[CwExperiment]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for e in experiments {
        for r in &e.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.s, r.t0, r.sample_index, r.displacement, r.defect, r.converged));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityProbe {
    pub radius: f64,
    pub velocities: usize,
    pub pairs_checked: usize,
    pub pairs_exempted: usize,
    pub collisions: usize,
    /// Smallest image separation among non-exempt pairs.
    pub min_image_separation: f64,
}

/// Velocity count whose pair count reaches `pairs`.
fn velocities_for_pairs(pairs: usize) -> usize {
    let mut m = 2;
    while m * (m - 1) / 2 < pairs {
        m += 1;
    }
    m
}

/// Probes injectivity of `Exp_s` on the ball `|u|_s / sqrt(lambda) < radius`
/// over all pairs of `m` sampled velocities, `m (m - 1) / 2 >= pair_count`.
pub fn exp_injectivity_probe(metric: &MetricGram, radius: f64, pair_count: usize, rng: &RngHandle) -> Result<InjectivityProbe> {
    if !(radius > 0.0 && radius < PI) {
        return Err(Error::InvalidArgument(format!("radius {radius} is outside (0, pi)")));
    }
    let m = velocities_for_pairs(pair_count);
    let root_lambda = metric.lambda.sqrt();
    let velocities: Vec<Vec10> = (0..m as u64)
        .map(|i| {
            let mut r = rng.split(i).rng();
            let dir = Vec10::from_fn(|_, _| r.sample::<f64, _>(StandardNormal));
            let rad = radius * r.random::<f64>().powf(0.1);
            dir * (rad * root_lambda / metric.norm(&dir))
        })
        .collect();
    probe_pairs(metric, radius, &velocities)
}

/// Injectivity check over all pairs of the given velocities.
pub fn probe_pairs(metric: &MetricGram, radius: f64, velocities: &[Vec10]) -> Result<InjectivityProbe> {
    let images: Vec<QMat2> = velocities.par_iter().map(|u| riemannian_exp(u, metric)).collect::<Result<Vec<_>>>()?;
    let mut probe = InjectivityProbe {
        radius,
        velocities: velocities.len(),
        pairs_checked: 0,
        pairs_exempted: 0,
        collisions: 0,
        min_image_separation: f64::INFINITY,
    };
    for a in 0..velocities.len() {
        for b in a + 1..velocities.len() {
            probe.pairs_checked += 1;
            if (velocities[a] - velocities[b]).amax() <= 1e-4 {
                probe.pairs_exempted += 1;
                continue;
            }
            let sep = (images[a] - images[b]).max_abs();
            probe.min_image_separation = probe.min_image_separation.min(sep);
            if sep < 1e-8 {
                probe.collisions += 1;
            }
        }
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricParts;
    use crate::so7::Structure;
    use std::sync::OnceLock;

    fn parts() -> &'static MetricParts {
        static P: OnceLock<MetricParts> = OnceLock::new();
        P.get_or_init(|| MetricParts::new(&Structure::build().unwrap()))
    }

    fn metric(s: f64) -> MetricGram {
        MetricGram::from_parts(s, parts()).unwrap()
    }

    #[test]
    fn rhs_vanishes_at_one_and_on_v() {
        let u = Vec10::from_fn(|i, _| (i as f64 * 0.7).sin());
        assert!(euler_arnold_rhs(&u, &metric(1.0)).amax() < 1e-12);
        for s in [0.8, 1.3] {
            assert!(euler_arnold_rhs(&sp2::v_coords(), &metric(s)).amax() < 1e-10);
            let m = metric(s);
            assert!(m.inner(&euler_arnold_rhs(&u, &m), &u).abs() < 1e-12);
        }
    }

    #[test]
    fn reduce_angle_range() {
        assert!((reduce_angle(4.0 * PI / 3.0) + 2.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(reduce_angle(0.0), 0.0);
    }

    #[test]
    fn gamma_is_cyclic() {
        let g = build_gamma(1).unwrap();
        assert_eq!(g.elements.len(), 3);
        assert_eq!(g.generator_order(1e-12), Some(3));
        assert!(g.closure_defect() < 1e-12);
        assert!((g.elements[g.identity_index()] - QMat2::identity()).max_abs() < 1e-15);
    }

    #[test]
    fn velocity_count_for_pairs() {
        assert_eq!(velocities_for_pairs(10_000), 142);
        assert_eq!(velocities_for_pairs(1), 2);
    }
}
