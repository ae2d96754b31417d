//! Synthesis of candidate extremals.
//!
//! Type I extremals are bang-bang: all interior arcs share one duration
//! delta_tau in (pi cos(alpha)/2, pi cos(alpha)), and successive corners lie
//! on a pair of circular loci parametrized by gamma, advancing by eta per
//! switch.  Type II extremals are bang-singular-bang, with the singular arc
//! on the x = 0 great circle.  Deadlocks are duration-stationary policies
//! that do not reach the target.

use crate::bloch::{
    propagate, propagate_segment, rotation_axis, ControlPolicy, ControlProblem,
    Segment, Vec3,
};
use crate::num::{brentq, fd_hessian, levenberg_marquardt};
use crate::pmp::{self, ExtremalDiagnostics};
use nalgebra::DVector;
use serde::Serialize;
use std::f64::consts::PI;

/// Corner-geometry angles for interior rotation angle theta in (pi, 2 pi).
///
/// xi is the co-latitude offset of the corner loci (0 < xi < pi) and eta
/// the per-switch advance of the locus parameter (-pi < eta < 0).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeometryAngles {
    pub xi: f64,
    pub eta: f64,
}

pub fn geometry_angles(theta: f64, u_max: f64) -> GeometryAngles {
    let cos_a = u_max.atan().cos();
    let t2 = (theta / 2.0).tan();
    let s2 = (theta / 2.0).sin();
    let c2 = (theta / 2.0).cos();
    let xi = -2.0 * (u_max * t2 * cos_a).atan();
    let eta = -2.0 * (s2 / (u_max * u_max + c2 * c2).sqrt()).atan();
    GeometryAngles { xi, eta }
}

/// Corner position on the locus: the s = +1 and s = -1 loci are circles of
/// co-latitude parametrized by gamma, with s the sign of the outgoing bang.
pub fn corner_locus(gamma: f64, xi: f64, s: f64) -> Vec3 {
    Vec3::new(
        s * gamma.sin() * (xi / 2.0).sin(),
        -gamma.sin() * (xi / 2.0).cos(),
        gamma.cos(),
    )
}

/// Structured description of a synthesized candidate.
#[derive(Debug, Clone, Serialize)]
pub enum Descriptor {
    TypeI {
        sign_first: f64,
        n_switches: usize,
        dt_first: f64,
        dt_interior: f64,
        dt_last: f64,
        theta: Option<f64>,
        gamma1: Option<f64>,
        deadlock: bool,
    },
    TypeII {
        s_open: f64,
        s_close: f64,
        dt_open: f64,
        dt_sing: f64,
        dt_close: f64,
    },
}

/// A synthesized candidate with its policy and cost data.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub descriptor: Descriptor,
    pub policy: ControlPolicy,
    /// Terminal index J = r(T) . o.
    pub j: f64,
    pub t: f64,
    pub reaches_target: bool,
    pub diagnostics: Option<ExtremalDiagnostics>,
}

fn alternating_signs(sign_first: f64, arcs: usize) -> Vec<f64> {
    (0..arcs).map(|i| sign_first * if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

fn type1_policy(sign_first: f64, u_max: f64, dts: &[f64]) -> ControlPolicy {
    let signs = alternating_signs(sign_first, dts.len());
    ControlPolicy {
        segments: signs
            .iter()
            .zip(dts)
            .map(|(&s, &dt)| Segment { u: s * u_max, dt })
            .collect(),
    }
}

/// Rotation angle in [0, 2 pi) carrying `from` to `to` about unit `axis`,
/// assuming both lie on the same circle about the axis.
fn rotation_angle_between(axis: &Vec3, from: &Vec3, to: &Vec3) -> Option<f64> {
    let pf = from - axis * axis.dot(from);
    let pt = to - axis * axis.dot(to);
    if pf.norm() < 1e-12 || pt.norm() < 1e-12 {
        return None;
    }
    if (axis.dot(from) - axis.dot(to)).abs() > 1e-7 {
        return None;
    }
    let ang = pf.cross(&pt).dot(axis).atan2(pf.dot(&pt));
    Some(ang.rem_euclid(2.0 * PI))
}

fn make_candidate(
    problem: &ControlProblem,
    descriptor: Descriptor,
    policy: ControlPolicy,
) -> Candidate {
    let r_final = propagate(&problem.r0, &policy);
    let j = r_final.dot(&problem.o);
    let reaches = (j - 1.0).abs() < 1e-8;
    Candidate {
        descriptor,
        t: policy.total_time(),
        policy,
        j,
        reaches_target: reaches,
        diagnostics: None,
    }
}

/// Target-reaching type I solutions with n switches and given opening sign.
///
/// n = 0: direct rotation.  n = 1: two-duration endpoint solve.  n >= 2:
/// two-unknown solve in (theta, gamma1) against the corner loci, with the
/// outer arc durations recovered from rotation angles afterwards.
pub fn synthesize_type1(problem: &ControlProblem, n: usize, sign_first: f64) -> Vec<Candidate> {
    let u_max = problem.u_max;
    let cos_a = problem.alpha().cos();
    let window = PI * cos_a;
    let mut out = Vec::new();

    match n {
        0 => {
            let (axis, rate) = rotation_axis(sign_first * u_max);
            if (axis.dot(&problem.r0) - axis.dot(&problem.o)).abs() < 1e-9 {
                if let Some(ang) = rotation_angle_between(&axis, &problem.r0, &problem.o) {
                    let dt = ang / rate;
                    if dt > 1e-12 && dt < window {
                        let descriptor = Descriptor::TypeI {
                            sign_first,
                            n_switches: 0,
                            dt_first: dt,
                            dt_interior: 0.0,
                            dt_last: dt,
                            theta: None,
                            gamma1: None,
                            deadlock: false,
                        };
                        out.push(make_candidate(
                            problem,
                            descriptor,
                            type1_policy(sign_first, u_max, &[dt]),
                        ));
                    }
                }
            }
        }
        1 => {
            // orthonormal tangent basis at the target
            let t1 = orthonormal_tangent(&problem.o);
            let t2 = problem.o.cross(&t1);
            let resid = |x: &DVector<f64>| {
                let p = type1_policy(sign_first, u_max, &[x[0], x[1]]);
                let e = propagate(&problem.r0, &p) - problem.o;
                DVector::from_vec(vec![e.dot(&t1), e.dot(&t2)])
            };
            let grid = 16;
            for i in 0..grid {
                for jn in 0..grid {
                    let x0 = DVector::from_vec(vec![
                        window * (i as f64 + 0.5) / grid as f64,
                        window * (jn as f64 + 0.5) / grid as f64,
                    ]);
                    let (x, cost) = levenberg_marquardt(&resid, &x0, 80, 1e-13);
                    if cost < 1e-11
                        && x[0] > 1e-9
                        && x[1] > 1e-9
                        && x[0] < window
                        && x[1] < window
                    {
                        push_dedup(&mut out, || {
                            let descriptor = Descriptor::TypeI {
                                sign_first,
                                n_switches: 1,
                                dt_first: x[0],
                                dt_interior: 0.0,
                                dt_last: x[1],
                                theta: None,
                                gamma1: None,
                                deadlock: false,
                            };
                            make_candidate(
                                problem,
                                descriptor,
                                type1_policy(sign_first, u_max, &[x[0], x[1]]),
                            )
                        }, &[x[0], x[1]]);
                    }
                }
            }
        }
        _ => {
            // corner locus signs: first corner sits on the -sign_first locus
            let sigma1 = -sign_first;
            let (axis_first, _) = rotation_axis(sign_first * u_max);
            let sigma_last = sign_first * if n % 2 == 0 { 1.0 } else { -1.0 };
            let (axis_last, _) = rotation_axis(sigma_last * u_max);
            let resid = |x: &DVector<f64>| {
                let (theta, gamma1) = (x[0], x[1]);
                let g = geometry_angles(theta, u_max);
                let c_first = corner_locus(gamma1, g.xi.abs(), sigma1);
                let gamma_n = gamma1 + (n - 1) as f64 * g.eta;
                let sigma_n = sigma1 * if n % 2 == 1 { 1.0 } else { -1.0 };
                let c_last = corner_locus(gamma_n, g.xi.abs(), sigma_n);
                DVector::from_vec(vec![
                    axis_first.dot(&(problem.r0 - c_first)),
                    axis_last.dot(&(problem.o - c_last)),
                ])
            };
            let grid = 64;
            for i in 0..grid {
                for jn in 0..grid {
                    let x0 = DVector::from_vec(vec![
                        PI * (1.0 + (i as f64 + 0.5) / grid as f64),
                        2.0 * PI * (jn as f64 + 0.5) / grid as f64 - PI,
                    ]);
                    let (x, cost) = levenberg_marquardt(&resid, &x0, 80, 1e-13);
                    if cost >= 1e-11 || x[0] <= PI + 1e-9 || x[0] >= 2.0 * PI - 1e-9 {
                        continue;
                    }
                    if let Some(c) = build_type1_from_angles(problem, n, sign_first, x[0], x[1]) {
                        let key: Vec<f64> = c.policy.segments.iter().map(|s| s.dt).collect();
                        push_dedup(&mut out, || c.clone(), &key);
                    }
                }
            }
        }
    }
    out
}

/// Reconstructs the full policy from a (theta, gamma1) root; returns None if
/// the outer arc durations fall outside (0, pi cos alpha) or the endpoint
/// check fails.
fn build_type1_from_angles(
    problem: &ControlProblem,
    n: usize,
    sign_first: f64,
    theta: f64,
    gamma1: f64,
) -> Option<Candidate> {
    let u_max = problem.u_max;
    let cos_a = problem.alpha().cos();
    let window = PI * cos_a;
    let g = geometry_angles(theta, u_max);
    let xi = g.xi.abs();
    let sigma1 = -sign_first;
    let c_first = corner_locus(gamma1, xi, sigma1);
    let gamma_n = gamma1 + (n - 1) as f64 * g.eta;
    let sigma_n = sigma1 * if n % 2 == 1 { 1.0 } else { -1.0 };
    let c_last = corner_locus(gamma_n, xi, sigma_n);

    let (axis_first, rate) = rotation_axis(sign_first * u_max);
    let dt_first = rotation_angle_between(&axis_first, &problem.r0, &c_first)? / rate;
    let (axis_last, _) = rotation_axis(sigma_n * u_max);
    let dt_last = rotation_angle_between(&axis_last, &c_last, &problem.o)? / rate;
    let dt_interior = theta * cos_a / 2.0;
    if dt_first <= 1e-9 || dt_first >= window || dt_last <= 1e-9 || dt_last >= window {
        return None;
    }
    let mut dts = vec![dt_first];
    dts.extend(std::iter::repeat(dt_interior).take(n - 1));
    dts.push(dt_last);
    let policy = type1_policy(sign_first, u_max, &dts);
    let r_final = propagate(&problem.r0, &policy);
    if (r_final.dot(&problem.o) - 1.0).abs() > 1e-9 {
        return None;
    }
    let descriptor = Descriptor::TypeI {
        sign_first,
        n_switches: n,
        dt_first,
        dt_interior,
        dt_last,
        theta: Some(theta),
        gamma1: Some(gamma1),
        deadlock: false,
    };
    Some(make_candidate(problem, descriptor, policy))
}

fn orthonormal_tangent(v: &Vec3) -> Vec3 {
    let trial = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (trial - v * v.dot(&trial)).normalize()
}

fn push_dedup<F: FnOnce() -> Candidate>(out: &mut Vec<Candidate>, make: F, key: &[f64]) {
    let exists = out.iter().any(|c| {
        let dts: Vec<f64> = c.policy.segments.iter().map(|s| s.dt).collect();
        dts.len() == key.len() && dts.iter().zip(key).all(|(a, b)| (a - b).abs() < 1e-6)
    });
    if !exists {
        out.push(make());
    }
}

/// Deadlock synthesis: policies stationary in every arc duration with the
/// transversality normalization a(T) = o, i.e. o . M_i = 0 for all arcs.
/// The interior arcs come out at (pi/2) cos(alpha) (the K = 0, c1 = 0 case).
pub fn synthesize_deadlocks(problem: &ControlProblem, n: usize, sign_first: f64) -> Vec<Candidate> {
    let u_max = problem.u_max;
    let cos_a = problem.alpha().cos();
    let window = PI * cos_a;
    let arcs = n + 1;
    let mut out = Vec::new();

    let stationarity = |dts: &[f64]| -> Vec<f64> {
        let p = type1_policy(sign_first, u_max, dts);
        let cols = pmp::duration_jacobian(&problem.r0, &p);
        cols.iter().map(|c| problem.o.dot(c)).collect()
    };

    if arcs == 1 {
        let f = |dt: f64| stationarity(&[dt])[0];
        // scan for sign changes over the admissible window
        let m = 128;
        for k in 0..m {
            let a = window * k as f64 / m as f64 + 1e-6;
            let b = window * (k + 1) as f64 / m as f64;
            if f(a) * f(b) < 0.0 {
                if let Some(dt) = brentq(f, a, b, 1e-14, 200) {
                    push_candidate_deadlock(problem, sign_first, &[dt], &mut out);
                }
            }
        }
        return out;
    }

    let resid = |x: &DVector<f64>| {
        let dts: Vec<f64> = x.iter().copied().collect();
        DVector::from_vec(stationarity(&dts))
    };
    let interior = PI / 2.0 * cos_a;
    let grid = 12;
    for i in 0..grid {
        for jn in 0..grid {
            let mut x0 = vec![window * (i as f64 + 0.5) / grid as f64];
            x0.extend(std::iter::repeat(interior).take(arcs - 2));
            x0.push(window * (jn as f64 + 0.5) / grid as f64);
            let (x, cost) = levenberg_marquardt(&resid, &DVector::from_vec(x0), 100, 1e-12);
            if cost < 1e-10 && x.iter().all(|&d| d > 1e-6 && d < window - 1e-9) {
                let dts: Vec<f64> = x.iter().copied().collect();
                push_candidate_deadlock(problem, sign_first, &dts, &mut out);
            }
        }
    }
    out
}

fn push_candidate_deadlock(
    problem: &ControlProblem,
    sign_first: f64,
    dts: &[f64],
    out: &mut Vec<Candidate>,
) {
    let n = dts.len() - 1;
    let interior = if n >= 2 {
        dts[1..n].iter().sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    push_dedup(out, || {
        let descriptor = Descriptor::TypeI {
            sign_first,
            n_switches: n,
            dt_first: dts[0],
            dt_interior: interior,
            dt_last: dts[n],
            theta: None,
            gamma1: None,
            deadlock: true,
        };
        make_candidate(problem, descriptor, type1_policy(sign_first, problem.u_max, dts))
    }, dts);
}

fn type2_policy(
    u_max: f64,
    s_open: f64,
    s_close: f64,
    dt_open: f64,
    dt_sing: f64,
    dt_close: f64,
) -> ControlPolicy {
    let mut segs = Vec::new();
    if dt_open > 1e-12 {
        segs.push(Segment { u: s_open * u_max, dt: dt_open });
    }
    segs.push(Segment { u: 0.0, dt: dt_sing });
    if dt_close > 1e-12 {
        segs.push(Segment { u: s_close * u_max, dt: dt_close });
    }
    ControlPolicy { segments: segs }
}

/// Type II (bang-singular-bang) synthesis for a given pair of bang signs.
/// The opening bang must deliver the state onto the singular great circle
/// x = 0; the drift preserves x; the closing bang reaches the target.
/// Singular arcs longer than pi/2 in tau are discarded (they violate the
/// singular second-order condition).
pub fn synthesize_type2(problem: &ControlProblem, s_open: f64, s_close: f64) -> Vec<Candidate> {
    let u_max = problem.u_max;
    let cos_a = problem.alpha().cos();
    let window = PI * cos_a;
    let mut out = Vec::new();
    let t1 = orthonormal_tangent(&problem.o);
    let t2 = problem.o.cross(&t1);

    let resid = |x: &DVector<f64>| {
        let p = type2_policy(u_max, s_open, s_close, x[0], x[1], x[2]);
        let j1 = propagate_segment(
            &problem.r0,
            &Segment { u: s_open * u_max, dt: x[0] },
        );
        let e = propagate(&problem.r0, &p) - problem.o;
        DVector::from_vec(vec![j1.x, e.dot(&t1), e.dot(&t2)])
    };

    let grid = 10;
    for i in 0..grid {
        for jn in 0..grid {
            for k in 0..grid {
                let x0 = DVector::from_vec(vec![
                    window * i as f64 / grid as f64,
                    PI / 2.0 * (jn as f64 + 0.5) / grid as f64,
                    window * k as f64 / grid as f64,
                ]);
                let (x, cost) = levenberg_marquardt(&resid, &x0, 80, 1e-13);
                let (a, s, b) = (x[0], x[1], x[2]);
                if cost < 1e-11
                    && a > -1e-9
                    && b > -1e-9
                    && s > 1e-9
                    && s < PI / 2.0 + 1e-9
                    && a < window
                    && b < window
                {
                    let (a, b) = (a.max(0.0), b.max(0.0));
                    push_dedup(&mut out, || {
                        let descriptor = Descriptor::TypeII {
                            s_open,
                            s_close,
                            dt_open: a,
                            dt_sing: s,
                            dt_close: b,
                        };
                        make_candidate(
                            problem,
                            descriptor,
                            type2_policy(u_max, s_open, s_close, a, s, b),
                        )
                    }, &[a, s, b]);
                }
            }
        }
    }
    out
}

/// Inserts `k` full loops (duration pi cos alpha each, exact identity
/// rotations) into the bang segment at `segment_idx`.
pub fn expand_family(policy: &ControlPolicy, insertions: &[(usize, usize)]) -> ControlPolicy {
    let mut p = policy.clone();
    for &(idx, k) in insertions {
        let seg = &mut p.segments[idx];
        let cos_a = (seg.u.atan()).cos();
        seg.dt += k as f64 * PI * cos_a;
    }
    p
}

/// Enumeration settings.
#[derive(Debug, Clone)]
pub struct EnumerationConfig {
    pub n_max: usize,
    /// Upper bound on candidate total time; families of loop-inserted
    /// extremals are infinite, so the census is horizon-limited.
    pub t_max: f64,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self { n_max: 6, t_max: 12.0 }
    }
}

/// Full candidate census: type I (kinematic and deadlock) over switch counts
/// and opening signs, type II over sign pairs, filtered by the Pontryagin
/// check, the deadlock second-order condition, and reversal deduplication.
pub fn enumerate_candidates(problem: &ControlProblem, cfg: &EnumerationConfig) -> Vec<Candidate> {
    if (problem.r0.dot(&problem.o) - 1.0).abs() < 1e-12 {
        let mut c = make_candidate(
            problem,
            Descriptor::TypeI {
                sign_first: 1.0,
                n_switches: 0,
                dt_first: 0.0,
                dt_interior: 0.0,
                dt_last: 0.0,
                theta: None,
                gamma1: None,
                deadlock: false,
            },
            ControlPolicy { segments: Vec::new() },
        );
        c.diagnostics = Some(pmp::extremal_check(problem, &c.policy));
        return vec![c];
    }
    let mut all = Vec::new();
    for s in [1.0, -1.0] {
        for n in 0..=cfg.n_max {
            all.extend(synthesize_type1(problem, n, s));
            all.extend(synthesize_deadlocks(problem, n, s));
        }
        for sc in [1.0, -1.0] {
            all.extend(synthesize_type2(problem, s, sc));
        }
    }
    all.retain(|c| c.t <= cfg.t_max);

    // first-order filter
    let mut passed: Vec<Candidate> = Vec::new();
    for mut c in all {
        let d = pmp::extremal_check(problem, &c.policy);
        if !d.is_extremal {
            continue;
        }
        c.diagnostics = Some(d);
        passed.push(c);
    }

    // second-order filter for deadlocks: the duration Hessian of J must be
    // negative semidefinite (otherwise the policy is a saddle, escapable by
    // a coordinated duration variation)
    passed.retain(|c| match &c.descriptor {
        Descriptor::TypeI { deadlock: true, .. } => deadlock_hessian_ok(problem, &c.policy),
        _ => true,
    });

    passed.retain(|c| !has_parked_arc(&problem.r0, &c.policy));
    // when o lies on a bang rotation axis, a trailing arc about that axis
    // leaves J flat; drop the redundant extensions of the base deadlock
    passed.retain(|c| {
        if !matches!(c.descriptor, Descriptor::TypeI { deadlock: true, .. }) {
            return true;
        }
        match c.policy.segments.last() {
            Some(s) if s.u != 0.0 => {
                let axis = Vec3::new(1.0, 0.0, s.u).normalize();
                axis.cross(&problem.o).norm() > 1e-7
            }
            _ => true,
        }
    });
    dedup_exact(&mut passed);
    dedup_reversals(&mut passed);
    passed.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    passed
}

/// True if some arc starts at a fixed point of its own rotation (state
/// parallel to the rotation axis); such an arc is a pure phase idle and the
/// candidate duplicates a shorter one.
fn has_parked_arc(r0: &Vec3, policy: &ControlPolicy) -> bool {
    let mut r = *r0;
    for seg in &policy.segments {
        if seg.dt > 1e-9 {
            let axis = Vec3::new(1.0, 0.0, seg.u).normalize();
            if r.cross(&axis).norm() < 1e-7 {
                return true;
            }
        }
        r = crate::bloch::propagate_segment(&r, seg);
    }
    false
}

/// Removes candidates whose control and duration vectors coincide with an
/// earlier entry; distinct synthesis branches can land on the same policy.
fn dedup_exact(cands: &mut Vec<Candidate>) {
    let mut keep: Vec<Candidate> = Vec::new();
    for c in cands.drain(..) {
        let dup = keep.iter().any(|k| {
            k.policy.segments.len() == c.policy.segments.len()
                && k.policy.segments.iter().zip(&c.policy.segments).all(|(a, b)| {
                    (a.u - b.u).abs() < 1e-9 && (a.dt - b.dt).abs() < 1e-6
                })
        });
        if !dup {
            keep.push(c);
        }
    }
    *cands = keep;
}

/// Checks negative semidefiniteness of the finite-difference Hessian of
/// J(durations) at a deadlock.
pub fn deadlock_hessian_ok(problem: &ControlProblem, policy: &ControlPolicy) -> bool {
    let us: Vec<f64> = policy.segments.iter().map(|s| s.u).collect();
    let dts: Vec<f64> = policy.segments.iter().map(|s| s.dt).collect();
    let f = |x: &DVector<f64>| {
        let dt: Vec<f64> = x.iter().copied().collect();
        let p = ControlPolicy::from_arcs(&us, &dt);
        propagate(&problem.r0, &p).dot(&problem.o)
    };
    let h = fd_hessian(&f, &DVector::from_vec(dts), 1e-4);
    let eig = h.symmetric_eigen();
    eig.eigenvalues.iter().all(|&l| l < 1e-6)
}

/// Removes time-reversal duplicates: a bang-bang candidate and its arc-order
/// reversal represent the same trap.  The canonical representative has
/// dt_first >= dt_last.
fn dedup_reversals(cands: &mut Vec<Candidate>) {
    let mut keep: Vec<Candidate> = Vec::new();
    for c in cands.drain(..) {
        let dts: Vec<f64> = c.policy.segments.iter().map(|s| s.dt).collect();
        let rev: Vec<f64> = dts.iter().rev().copied().collect();
        let dup = keep.iter().any(|k| {
            let kd: Vec<f64> = k.policy.segments.iter().map(|s| s.dt).collect();
            kd.len() == rev.len()
                && (k.j - c.j).abs() < 1e-6
                && kd.iter().zip(&rev).all(|(a, b)| (a - b).abs() < 1e-5)
        });
        if dup {
            // prefer the representative with the longer opening arc
            let pos = keep
                .iter()
                .position(|k| {
                    let kd: Vec<f64> = k.policy.segments.iter().map(|s| s.dt).collect();
                    kd.len() == rev.len()
                        && (k.j - c.j).abs() < 1e-6
                        && kd.iter().zip(&rev).all(|(a, b)| (a - b).abs() < 1e-5)
                })
                .unwrap();
            let kd0 = keep[pos].policy.segments[0].dt;
            if dts[0] > kd0 + 1e-9 {
                keep[pos] = c;
            }
        } else {
            keep.push(c);
        }
    }
    *cands = keep;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::Mode;
    use approx::assert_relative_eq;

    fn fig9_problem() -> ControlProblem {
        ControlProblem::new(
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(-1.0, 1.0, 0.0),
            0.25,
            Mode::TimeOptimal,
        )
    }

    #[test]
    fn corner_chain_identity() {
        // advancing a corner through one interior arc lands on the opposite
        // locus with gamma advanced by eta, to machine precision
        let u_max = 1.3;
        let theta = 4.1;
        let g = geometry_angles(theta, u_max);
        let xi = g.xi.abs();
        let cos_a = u_max.atan().cos();
        for s in [1.0, -1.0] {
            for k in 0..8 {
                let gamma = 0.3 + 0.7 * k as f64;
                let c = corner_locus(gamma, xi, s);
                let c2 = propagate_segment(
                    &c,
                    &Segment { u: s * u_max, dt: theta * cos_a / 2.0 },
                );
                let expect = corner_locus(gamma + g.eta, xi, -s);
                assert_relative_eq!((c2 - expect).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn blue_solution_found() {
        let p = fig9_problem();
        let cands = synthesize_type1(&p, 4, 1.0);
        let blue = cands
            .iter()
            .find(|c| (c.t - 6.011542).abs() < 1e-3)
            .expect("blue (+,4) solution");
        let dts: Vec<f64> = blue.policy.segments.iter().map(|s| s.dt).collect();
        assert_relative_eq!(dts[0], 0.336822, epsilon = 1e-5);
        assert_relative_eq!(dts[1], 1.779299, epsilon = 1e-5);
        assert_relative_eq!(dts[4], 0.336822, epsilon = 1e-5);
        assert!(blue.reaches_target);
    }

    #[test]
    fn red_deadlock_found() {
        let p = fig9_problem();
        let cands = synthesize_deadlocks(&p, 0, 1.0);
        let red = cands.iter().find(|c| (c.j - 0.058824).abs() < 1e-4);
        let red = red.expect("single-bang deadlock");
        assert_relative_eq!(red.policy.segments[0].dt, 0.230837, epsilon = 1e-5);
    }

    #[test]
    fn green_deadlock_found() {
        let p = fig9_problem();
        let cands = synthesize_deadlocks(&p, 2, 1.0);
        let green = cands.iter().find(|c| (c.j - 0.861782).abs() < 1e-4);
        let green = green.expect("(+,2) deadlock");
        let dts: Vec<f64> = green.policy.segments.iter().map(|s| s.dt).collect();
        assert_relative_eq!(dts[0], 0.877367, epsilon = 1e-5);
        assert_relative_eq!(dts[1], 1.523896, epsilon = 1e-5);
        assert_relative_eq!(dts[2], 0.877367, epsilon = 1e-5);
        assert!(deadlock_hessian_ok(&p, &green.policy));
    }

    #[test]
    fn loop_insertion_is_identity() {
        let p = fig9_problem();
        let cands = synthesize_type1(&p, 4, 1.0);
        let blue = cands.iter().find(|c| (c.t - 6.011542).abs() < 1e-3).unwrap();
        let expanded = expand_family(&blue.policy, &[(2, 2)]);
        let e1 = propagate(&p.r0, &blue.policy);
        let e2 = propagate(&p.r0, &expanded);
        assert_relative_eq!((e1 - e2).norm(), 0.0, epsilon = 1e-12);
    }
}
