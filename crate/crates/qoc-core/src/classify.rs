//! Candidate classification: second-order criteria, switching-count bounds,
//! trap taxonomy, and geometric diagnostics.

use crate::bloch::{propagate_policy, ControlPolicy, ControlProblem, Vec3};
use crate::synthesis::{deadlock_hessian_ok, geometry_angles, Candidate, Descriptor};
use serde::Serialize;
use std::f64::consts::PI;

/// Trap taxonomy.  The buckets are loose by construction: a real trap can
/// combine features, and the tree below assigns the first matching label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Category {
    NotExtremal,
    PerfectLoop,
    SaddlePoint,
    GloballyOptimal,
    TopologicalTrap,
    DeadlockTrap,
    LoopTrap,
}

/// Corner states (junctions between segments) along a policy.
pub fn corner_points(r0: &Vec3, policy: &ControlPolicy) -> Vec<Vec3> {
    let mut out = Vec::new();
    let mut r = *r0;
    for (i, seg) in policy.segments.iter().enumerate() {
        r = crate::bloch::propagate_segment(&r, seg);
        if i + 1 < policy.segments.len() {
            out.push(r);
        }
    }
    out
}

/// Corner-geometry residuals for a bang-bang extremal: every corner must lie
/// on one of two planes through the z-axis (split by outgoing bang sign),
/// and the locus parameters gamma_i must advance by exactly eta per switch.
#[derive(Debug, Clone, Serialize)]
pub struct CornerGeometry {
    pub plane_residual: f64,
    pub gamma_step_residual: f64,
    pub xi: f64,
    pub eta: f64,
}

pub fn corner_geometry_check(problem: &ControlProblem, policy: &ControlPolicy) -> Option<CornerGeometry> {
    let corners = corner_points(&problem.r0, policy);
    if corners.is_empty() {
        return None;
    }
    let n = corners.len();
    // interior rotation angle from the interior arc durations
    let cos_a = problem.alpha().cos();
    let theta = if n >= 2 {
        let inner: f64 = policy.segments[1..n].iter().map(|s| s.dt).sum();
        2.0 * inner / ((n - 1) as f64 * cos_a)
    } else {
        return Some(CornerGeometry { plane_residual: 0.0, gamma_step_residual: 0.0, xi: 0.0, eta: 0.0 });
    };
    let g = geometry_angles(theta, problem.u_max);
    let xi = g.xi.abs();
    // plane normal for outgoing sign s: (cos(xi/2), s sin(xi/2), 0)
    let mut plane_residual = 0.0f64;
    let mut gammas = Vec::with_capacity(n);
    for (i, c) in corners.iter().enumerate() {
        let s = policy.segments[i + 1].u.signum();
        let nrm = Vec3::new((xi / 2.0).cos(), s * (xi / 2.0).sin(), 0.0);
        plane_residual = plane_residual.max(nrm.dot(c).abs());
        gammas.push((-c.y / (xi / 2.0).cos()).atan2(c.z));
    }
    let mut gamma_step_residual = 0.0f64;
    for w in gammas.windows(2) {
        let step = (w[1] - w[0] - g.eta + PI).rem_euclid(2.0 * PI) - PI;
        gamma_step_residual = gamma_step_residual.max(step.abs());
    }
    Some(CornerGeometry { plane_residual, gamma_step_residual, xi, eta: g.eta })
}

/// Corner second-order parameters q_i = cot^2(gamma_i) - cot^2(eta/2).
pub fn q_spectrum(problem: &ControlProblem, policy: &ControlPolicy) -> Vec<f64> {
    let corners = corner_points(&problem.r0, policy);
    let n = corners.len();
    if n < 2 {
        return corners.iter().map(|_| f64::INFINITY).collect();
    }
    let cos_a = problem.alpha().cos();
    let inner: f64 = policy.segments[1..n].iter().map(|s| s.dt).sum();
    let theta = 2.0 * inner / ((n - 1) as f64 * cos_a);
    let g = geometry_angles(theta, problem.u_max);
    let cot2_eta = {
        let t = (g.eta / 2.0).tan();
        1.0 / (t * t)
    };
    corners
        .iter()
        .map(|c| {
            let z2 = c.z * c.z;
            z2 / (1.0 - z2).max(1e-300) - cot2_eta
        })
        .collect()
}

/// Second-order q-criterion: the set {q_i} of a locally time-optimal type I
/// extremal has at most one negative entry, and that entry (if present) has
/// the smallest magnitude.
pub fn q_criterion(qs: &[f64]) -> bool {
    let tol = 1e-9;
    let negatives: Vec<f64> = qs.iter().copied().filter(|&q| q < -tol).collect();
    match negatives.len() {
        0 => true,
        1 => {
            let qn = negatives[0].abs();
            qs.iter().all(|&q| q.abs() >= qn - tol)
        }
        _ => false,
    }
}

/// Type hint per the phi-criteria: which extremal type the global optimum
/// must have, when either criterion fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TypeHint {
    TypeI,
    TypeII,
    Either,
}

/// Switching-count bounds for the problem.
#[derive(Debug, Clone, Serialize)]
pub struct SwitchingBounds {
    /// Local optimality bound n <= pi/alpha.
    pub n_max_local: f64,
    /// Global optimality bound n <= pi/(2 alpha) + 1.
    pub n_max_global: f64,
    /// n <= 2 when u_max > sqrt(1 + sqrt(2)).
    pub n_max_two: bool,
    /// Refined endpoint-dependent upper bound, when defined.
    pub n_max_refined: Option<f64>,
    /// Lower bound from x-excursions (any type).
    pub n_min: f64,
    /// Lower bound from z-excursions (type I only).
    pub n_min_type1: f64,
    pub type_hint: TypeHint,
}

pub fn switching_bounds(problem: &ControlProblem) -> SwitchingBounds {
    let alpha = problem.alpha();
    let u = problem.u_max;
    let (r0, o) = (problem.r0, problem.o);

    let n_max_refined = {
        // order endpoints so that |rp_x| >= |rm_x|
        let (rm, rp) = if r0.x.abs() >= o.x.abs() { (o, r0) } else { (r0, o) };
        let prod = rm.x * rp.x;
        if prod.abs() < 1e-12 {
            None
        } else if prod < 0.0 {
            Some(
                ((rm.x / rp.x).acos() / (2.0 * (u / rp.x).atan()).abs())
                    .max(PI / (2.0 * (u / rm.x).atan()).abs())
                    + 1.0,
            )
        } else {
            Some(
                ((rm.x / rp.x).acos() / (2.0 * (u / rp.x).atan()).abs() + 3.0)
                    .min(PI / (4.0 * (u / rp.x).atan()).abs())
                    + 1.0,
            )
        }
    };

    let phi_x = (r0.x.asin() - o.x.asin()).abs();
    let phi_z = (r0.z.asin() - o.z.asin()).abs();
    let type_hint = if phi_x > 4.0 * alpha {
        TypeHint::TypeI
    } else if phi_z > (PI / (2.0 * alpha) + 2.0) * (PI - 2.0 * alpha) {
        TypeHint::TypeII
    } else {
        TypeHint::Either
    };

    SwitchingBounds {
        n_max_local: PI / alpha,
        n_max_global: PI / (2.0 * alpha) + 1.0,
        n_max_two: u > (1.0 + 2.0f64.sqrt()).sqrt(),
        n_max_refined,
        n_min: phi_x / (2.0 * alpha) - 1.0,
        n_min_type1: phi_z / (2.0 * (1.0 / u).atan()) - 1.0,
        type_hint,
    }
}

/// Corner x-interval inequality for globally optimal type I solutions:
/// min(0, r0_x, o_x) < r_i_x < max(0, r0_x, o_x) for every corner.
pub fn corner_inequality_checks(problem: &ControlProblem, policy: &ControlPolicy) -> bool {
    let lo = 0.0f64.min(problem.r0.x).min(problem.o.x);
    let hi = 0.0f64.max(problem.r0.x).max(problem.o.x);
    corner_points(&problem.r0, policy)
        .iter()
        .all(|c| c.x > lo - 1e-9 && c.x < hi + 1e-9)
}

/// V-shape corner condition u_i^- r_i_x r_i_y >= 0, necessary for local
/// time-optimality of type I extremals.
pub fn corner_shape_ok(problem: &ControlProblem, policy: &ControlPolicy) -> bool {
    let corners = corner_points(&problem.r0, policy);
    corners
        .iter()
        .enumerate()
        .all(|(i, c)| policy.segments[i].u * c.x * c.y >= -1e-9)
}

/// Equatorial endpoint classification: when both endpoints have x = 0, the
/// singular drift connecting them is globally optimal iff r0_y o_y > 0 and
/// (o_z - r0_z) r0_y > 0, and a saddle point otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquatorialCase {
    GloballyOptimalSingular,
    SaddleSingular,
    NotEquatorial,
}

pub fn equatorial_classification(problem: &ControlProblem) -> EquatorialCase {
    let (r0, o) = (problem.r0, problem.o);
    if r0.x.abs() > 1e-9 || o.x.abs() > 1e-9 {
        return EquatorialCase::NotEquatorial;
    }
    if r0.y * o.y > 0.0 && (o.z - r0.z) * r0.y > 0.0 {
        EquatorialCase::GloballyOptimalSingular
    } else {
        EquatorialCase::SaddleSingular
    }
}

/// True if the policy contains a bang arc of duration >= pi cos(alpha), the
/// signature of a removable full-loop insertion (perfect loop).
pub fn perfect_loop_detect(policy: &ControlPolicy) -> bool {
    policy.canonicalize().segments.iter().any(|s| {
        s.u != 0.0 && s.dt >= PI * (s.u.atan()).cos() - 1e-9
    })
}

/// True if a type II policy has an interior bang (bang arc strictly between
/// two singular arcs) of duration exceeding one full loop; such extremals
/// are saddle points.
pub fn interior_bang_filter(policy: &ControlPolicy) -> bool {
    let segs = &policy.canonicalize().segments;
    for i in 1..segs.len().saturating_sub(1) {
        let s = segs[i];
        if s.u != 0.0 && segs[i - 1].u == 0.0 && segs[i + 1].u == 0.0 {
            if s.dt > PI * s.u.atan().cos() + 1e-9 {
                return false;
            }
        }
    }
    true
}

/// Closest self-approach of a trajectory, excluding near-diagonal pairs.
#[derive(Debug, Clone, Serialize)]
pub struct SelfIntersection {
    pub min_distance: f64,
    pub tau_pair: (f64, f64),
    pub intersecting: bool,
}

pub fn self_intersection(r0: &Vec3, policy: &ControlPolicy) -> SelfIntersection {
    let total = policy.total_time();
    let per_seg = (2048 / policy.segments.len().max(1)).max(64);
    let pts = propagate_policy(r0, policy, per_seg);
    let gap = (0.15 * total).max(0.05);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if pts[j].tau - pts[i].tau < gap {
                continue;
            }
            let d = (pts[i].r - pts[j].r).norm();
            if d < best.0 {
                best = (d, pts[i].tau, pts[j].tau);
            }
        }
    }
    // local refinement around the best pair
    let (mut d, mut t1, mut t2) = best;
    if d.is_finite() {
        let mut h = total / per_seg as f64;
        let eval = |a: f64, b: f64| -> f64 {
            let ra = state_at(r0, policy, a);
            let rb = state_at(r0, policy, b);
            (ra - rb).norm()
        };
        for _ in 0..40 {
            let mut moved = false;
            for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                let (a, b) = ((t1 + da).clamp(0.0, total), (t2 + db).clamp(0.0, total));
                if b - a < gap {
                    continue;
                }
                let v = eval(a, b);
                if v < d {
                    d = v;
                    t1 = a;
                    t2 = b;
                    moved = true;
                }
            }
            if !moved {
                h *= 0.5;
                if h < 1e-12 {
                    break;
                }
            }
        }
    }
    SelfIntersection { min_distance: d, tau_pair: (t1, t2), intersecting: d < 1e-6 }
}

fn state_at(r0: &Vec3, policy: &ControlPolicy, tau: f64) -> Vec3 {
    let mut r = *r0;
    let mut t = tau;
    for seg in &policy.segments {
        let dt = t.min(seg.dt);
        r = crate::bloch::propagate_segment(&r, &crate::bloch::Segment { u: seg.u, dt });
        t -= dt;
        if t <= 0.0 {
            break;
        }
    }
    r
}

fn is_type2(d: &Descriptor) -> bool {
    matches!(d, Descriptor::TypeII { .. })
}

/// One classified candidate.
#[derive(Debug, Clone, Serialize)]
pub struct Classified {
    pub candidate: Candidate,
    pub category: Category,
    pub q_values: Vec<f64>,
    pub self_intersection: Option<SelfIntersection>,
}

/// Classifies an enumerated candidate set.  `oracle_t` is the independently
/// computed minimum time; `Err` is returned when the best candidate and the
/// oracle disagree by more than `oracle_tol`.
#[derive(Debug, thiserror::Error)]
#[error("oracle disagreement: best candidate T = {candidate_t}, oracle T = {oracle_t}")]
pub struct OracleDisagreement {
    pub candidate_t: f64,
    pub oracle_t: f64,
}

pub fn classify(
    problem: &ControlProblem,
    candidates: &[Candidate],
    oracle_t: Option<f64>,
    oracle_tol: f64,
) -> Result<Vec<Classified>, OracleDisagreement> {
    // pick the certified global optimum: kinematic-maximum reachers first
    // (max J, then min T among them)
    let best_idx = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.reaches_target)
        .min_by(|a, b| a.1.t.partial_cmp(&b.1.t).unwrap())
        .map(|(i, _)| i)
        .or_else(|| {
            candidates
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.j.partial_cmp(&b.1.j).unwrap())
                .map(|(i, _)| i)
        });

    if let (Some(bi), Some(ot)) = (best_idx, oracle_t) {
        let bt = candidates[bi].t;
        if candidates[bi].reaches_target && (bt - ot).abs() > oracle_tol {
            return Err(OracleDisagreement { candidate_t: bt, oracle_t: ot });
        }
    }

    let best_is_type2 = best_idx.map(|i| is_type2(&candidates[i].descriptor)).unwrap_or(false);
    let (j_opt, t_opt) = best_idx
        .map(|i| (candidates[i].j, candidates[i].t))
        .unwrap_or((1.0, f64::INFINITY));

    let mut out = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let extremal_ok = c.diagnostics.as_ref().map(|d| d.is_extremal).unwrap_or(true);
        let qs = if !is_type2(&c.descriptor) {
            q_spectrum(problem, &c.policy)
        } else {
            Vec::new()
        };
        let si = self_intersection(&problem.r0, &c.policy);

        let category = if !extremal_ok {
            Category::NotExtremal
        } else if perfect_loop_detect(&c.policy) {
            Category::PerfectLoop
        } else if second_order_fails(problem, c, &qs) {
            Category::SaddlePoint
        } else if Some(i) == best_idx {
            Category::GloballyOptimal
        } else if is_type2(&c.descriptor) != best_is_type2 {
            Category::TopologicalTrap
        } else if c.j < j_opt - 1e-9 && c.t < t_opt {
            Category::DeadlockTrap
        } else {
            Category::LoopTrap
        };
        out.push(Classified {
            candidate: c.clone(),
            category,
            q_values: qs,
            self_intersection: Some(si),
        });
    }
    Ok(out)
}

fn second_order_fails(problem: &ControlProblem, c: &Candidate, qs: &[f64]) -> bool {
    match &c.descriptor {
        Descriptor::TypeI { deadlock: true, .. } => !deadlock_hessian_ok(problem, &c.policy),
        Descriptor::TypeI { .. } => {
            !q_criterion(qs) || !corner_shape_ok(problem, &c.policy)
        }
        Descriptor::TypeII { dt_sing, .. } => {
            // singular arcs over half a drift circle and interior bangs over
            // a full loop are saddles
            if *dt_sing > PI / 2.0 + 1e-9 || !interior_bang_filter(&c.policy) {
                return true;
            }
            // each singular connector r- -> r+ must satisfy the equatorial
            // optimality condition r-_y r+_y > 0, (r+_z - r-_z) r-_y > 0
            let corners = corner_points(&problem.r0, &c.policy);
            let segs = &c.policy.segments;
            let mut endpoint = problem.r0;
            for seg in segs {
                endpoint = crate::bloch::propagate_segment(&endpoint, seg);
            }
            for (k, seg) in segs.iter().enumerate() {
                if seg.u != 0.0 || seg.dt <= 1e-12 {
                    continue;
                }
                let rm = if k == 0 { problem.r0 } else { corners[k - 1] };
                let rp = if k + 1 == segs.len() { endpoint } else { corners[k] };
                if rm.y * rp.y < -1e-9 || (rp.z - rm.z) * rm.y < -1e-9 {
                    return true;
                }
            }
            false
        }
    }
}
