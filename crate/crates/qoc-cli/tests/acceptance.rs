//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL` line with the measured numbers.

use qoc_core::bloch::{
    propagate_segment, rotate_about, rotation_axis, ControlProblem, Mode, Segment, Vec3,
};
use qoc_core::classify::{
    classify, corner_geometry_check, corner_inequality_checks, q_criterion, switching_bounds,
    Category, Classified,
};
use qoc_core::num::{brentq, levenberg_marquardt};
use qoc_core::oracle::oracle_min_time;
use qoc_core::scan::{scan, ScanConfig};
use qoc_core::synthesis::{
    enumerate_candidates, geometry_angles, Descriptor, EnumerationConfig,
};
use qoc_core::variation::{
    antiequatorial_gap, drift_time, equatorial_gap_a, equatorial_gap_b, needle_variation_measured,
    needle_variation_timings, sliding_expansion, sliding_measured,
};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "criterion {}: {} - {}",
        criterion,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "criterion {} failed: {}", criterion, detail);
}

fn solve_json(demo: &str) -> serde_json::Value {
    let out = Command::new(env!("CARGO_BIN_EXE_qoc"))
        .args(["solve", "--demo", demo])
        .output()
        .expect("spawn qoc");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn durations(c: &serde_json::Value) -> Vec<f64> {
    c["durations"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn matches_row(c: &serde_json::Value, sign: f64, dts: &[f64], tol: f64, category: &str) -> bool {
    let d = durations(c);
    let first_u = c["controls"].as_array().unwrap()[0].as_f64().unwrap();
    if d.len() != dts.len() || c["category"] != category {
        return false;
    }
    let direct =
        first_u * sign > 0.0 && d.iter().zip(dts).all(|(a, b)| (a - b).abs() < tol);
    // reversal duplicates are collapsed to one orientation, so a published
    // row may be present as its time-reversed mirror
    let mirrored = first_u * sign < 0.0
        && d.iter().rev().zip(dts).all(|(a, b)| (a - b).abs() < tol);
    direct || mirrored
}

#[test]
fn criterion_1_fig9_census() {
    let t0 = Instant::now();
    let v = solve_json("fig9");
    let cands = v["candidates"].as_array().unwrap();
    let rows: [(f64, Vec<f64>, &str); 4] = [
        (1.0, vec![0.23], "DeadlockTrap"),
        (-1.0, vec![0.88, 1.52, 0.88], "DeadlockTrap"),
        (1.0, vec![0.33, 1.78, 1.78, 1.78, 0.33], "GloballyOptimal"),
        (-1.0, vec![1.15, 1.72, 1.72, 1.72, 1.72, 0.57], "LoopTrap"),
    ];
    let published_found = rows
        .iter()
        .all(|(s, dts, cat)| cands.iter().any(|c| matches_row(c, *s, dts, 0.01, cat)));
    let switch_counts: Vec<usize> = cands.iter().map(|c| durations(c).len() - 1).collect();
    let no_forbidden_n = switch_counts.iter().all(|&n| n != 1 && n != 3 && n <= 5);
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = published_found && cands.len() == 4 && no_forbidden_n && elapsed < 60.0;
    report(
        1,
        pass,
        &format!(
            "published rows found: {}; candidates: {} (want exactly 4); switch counts {:?}; {:.1}s",
            published_found,
            cands.len(),
            switch_counts,
            elapsed
        ),
    );
}

#[test]
fn criterion_2_fig10_census() {
    let t0 = Instant::now();
    let v = solve_json("fig10");
    let cands = v["candidates"].as_array().unwrap();
    let optimal = cands
        .iter()
        .any(|c| matches_row(c, -1.0, &[0.0327, 0.262, 0.017], 0.005, "GloballyOptimal"));
    let topological = cands
        .iter()
        .any(|c| matches_row(c, -1.0, &[0.075, 0.031, 0.324], 0.005, "TopologicalTrap"));
    let deadlock = cands.iter().any(|c| matches_row(c, -1.0, &[0.020], 0.005, "DeadlockTrap"));
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = optimal && topological && deadlock && elapsed < 60.0;
    report(
        2,
        pass,
        &format!(
            "optimal I: {}; topological II: {}; deadlock I: {}; {:.1}s",
            optimal, topological, deadlock, elapsed
        ),
    );
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_problems(count: usize, seed: u64) -> Vec<ControlProblem> {
    let u_levels = [0.25, 1.0, 4.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let r0 = random_unit(&mut rng);
            let mut o = random_unit(&mut rng);
            while (r0.dot(&o) - 1.0).abs() < 1e-6 {
                o = random_unit(&mut rng);
            }
            ControlProblem::new(r0, o, u_levels[i % u_levels.len()], Mode::TimeOptimal)
        })
        .collect()
}

fn enum_config(problem: &ControlProblem) -> EnumerationConfig {
    let b = switching_bounds(problem);
    let n_max = (b.n_max_global.ceil() as usize + 1).clamp(3, 9);
    EnumerationConfig { n_max, t_max: 4.0 * PI / problem.alpha().min(1.0) }
}

fn solve_classified(problem: &ControlProblem, seed: u64) -> (Vec<Classified>, f64) {
    let cands = enumerate_candidates(problem, &enum_config(problem));
    let oracle = oracle_min_time(problem, enum_config(problem).n_max + 2, 1e-3, 64, seed)
        .expect("oracle reaches target");
    let classified =
        classify(problem, &cands, Some(oracle.best_t), 2e-3).expect("oracle concordance");
    (classified, oracle.best_t)
}

#[test]
fn criterion_3_oracle_concordance() {
    let t0 = Instant::now();
    let problems = random_problems(20, 42);
    let mut worst = 0.0f64;
    let mut pass = true;
    for (i, p) in problems.iter().enumerate() {
        let cands = enumerate_candidates(p, &enum_config(p));
        let best_t = cands
            .iter()
            .filter(|c| c.reaches_target)
            .map(|c| c.t)
            .fold(f64::INFINITY, f64::min);
        let oracle = oracle_min_time(p, enum_config(p).n_max + 2, 1e-3, 64, 1000 + i as u64)
            .expect("oracle reaches target");
        let diff = best_t - oracle.best_t;
        if diff.abs() > 2e-3 {
            let best = cands
                .iter()
                .filter(|c| c.reaches_target)
                .min_by(|a, b| a.t.total_cmp(&b.t))
                .unwrap();
            eprintln!(
                "  problem {} u_max={} r0={:?} o={:?}: T_synth={:.6} T_oracle={:.6} diff={:+.2e} best={:?}",
                i, p.u_max, p.r0, p.o, best_t, oracle.best_t, diff, best.policy
            );
        }
        worst = worst.max(diff.abs());
        if diff.abs() > 2e-3 {
            pass = false;
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    pass = pass && elapsed < 600.0;
    report(
        3,
        pass,
        &format!("20 problems, worst |T_synth - T_oracle| = {:.2e} (tol 2e-3); {:.1}s", worst, elapsed),
    );
}

fn criteria_1_to_3_solutions() -> Vec<(ControlProblem, Vec<Classified>)> {
    let fig9 = ControlProblem::new(
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(-1.0, 1.0, 0.0),
        0.25,
        Mode::TimeOptimal,
    );
    let mut out = Vec::new();
    for p in std::iter::once(fig9).chain(random_problems(20, 42)) {
        let (cl, _) = solve_classified(&p, 7);
        out.push((p, cl));
    }
    out
}

#[test]
fn criterion_4_corner_geometry() {
    let mut worst_plane = 0.0f64;
    let mut worst_step = 0.0f64;
    let mut checked = 0;
    for (p, cl) in criteria_1_to_3_solutions() {
        for c in &cl {
            let cand = &c.candidate;
            let type1_reaching = matches!(
                cand.descriptor,
                Descriptor::TypeI { deadlock: false, n_switches, .. } if n_switches >= 2
            ) && cand.reaches_target;
            if !type1_reaching {
                continue;
            }
            if let Some(g) = corner_geometry_check(&p, &cand.policy) {
                worst_plane = worst_plane.max(g.plane_residual);
                worst_step = worst_step.max(g.gamma_step_residual);
                checked += 1;
            }
        }
    }
    let pass = checked > 0 && worst_plane < 1e-9 && worst_step < 1e-9;
    report(
        4,
        pass,
        &format!(
            "{} type I extremals; worst plane residual {:.2e}, worst gamma-step residual {:.2e} (tol 1e-9)",
            checked, worst_plane, worst_step
        ),
    );
}

#[test]
fn criterion_5_bound_suite() {
    let mut violations = Vec::new();
    let mut checked = 0;
    for (p, cl) in criteria_1_to_3_solutions() {
        let bounds = switching_bounds(&p);
        for c in &cl {
            let cand = &c.candidate;
            let locally_optimal = matches!(
                c.category,
                Category::GloballyOptimal
                    | Category::DeadlockTrap
                    | Category::LoopTrap
                    | Category::TopologicalTrap
            );
            let (n, deadlock) = match cand.descriptor {
                Descriptor::TypeI { n_switches, deadlock, .. } => (n_switches, deadlock),
                _ => continue,
            };
            if !locally_optimal {
                continue;
            }
            checked += 1;
            if cand.reaches_target && n >= 2 && !q_criterion(&c.q_values) {
                violations.push(format!("q-criterion at u_max={} n={}", p.u_max, n));
            }
            if n as f64 > bounds.n_max_local + 1e-9 {
                violations.push(format!("n={} > pi/alpha={:.2}", n, bounds.n_max_local));
            }
            if p.u_max == 4.0 && !deadlock && n > 2 {
                violations.push(format!("n={} > 2 at u_max=4", n));
            }
            if c.category == Category::GloballyOptimal {
                if !corner_inequality_checks(&p, &cand.policy) {
                    violations.push(format!("corner inequality at u_max={}", p.u_max));
                }
                if let Some(refined) = bounds.n_max_refined {
                    if (n as f64) > refined + 1e-9 {
                        violations.push(format!("n={} > refined bound {:.2}", n, refined));
                    }
                }
            }
        }
    }
    let pass = !violations.is_empty() == false && checked > 0;
    report(
        5,
        pass,
        &format!("{} locally-optimal type I candidates; violations: {:?}", checked, violations),
    );
}

/// Direct two-bang connection time between equatorial points, via a
/// Levenberg-Marquardt solve for the two arc durations.
fn two_bang_time(u_max: f64, rm: &Vec3, rp: &Vec3, seed: f64) -> f64 {
    let f = |x: &DVector<f64>| {
        let mid = propagate_segment(rm, &Segment { u: u_max, dt: x[0] });
        let end = propagate_segment(&mid, &Segment { u: -u_max, dt: x[1] });
        DVector::from_vec(vec![end.x - rp.x, end.y - rp.y, end.z - rp.z])
    };
    let (x, resid) = levenberg_marquardt(&f, &DVector::from_vec(vec![seed, seed]), 200, 1e-13);
    assert!(resid < 1e-11, "two-bang solve failed: resid {resid}");
    x[0] + x[1]
}

#[test]
fn criterion_6_appendix_formula_oracles() {
    let t0 = Instant::now();
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut worst_hat = 0.0f64;
    let mut worst_needle = 0.0f64;

    // delta T_a: closed form equals twice the measured time gap between the
    // two-bang route and the equatorial drift
    let u_max = 0.5;
    for i in 0..20 {
        for j in 0..20 {
            let zm = -0.7 + 0.5 * i as f64 / 19.0;
            let zp = zm + 0.05 + 0.6 * j as f64 / 19.0;
            let rm = Vec3::new(0.0, (1.0 - zm * zm).sqrt(), zm);
            let rp = Vec3::new(0.0, (1.0 - zp * zp).sqrt(), zp);
            let t_drift = (zp.asin() - zm.asin()) / 2.0;
            let t_bang = two_bang_time(u_max, &rm, &rp, 0.6 * t_drift);
            let direct = 2.0 * (t_bang - t_drift);
            worst_a = worst_a.max((equatorial_gap_a(u_max, zm, zp) - direct).abs());
        }
    }

    // delta T_b: pole-crossing drift time minus the bang shortcut between
    // mirror equatorial points
    for i in 0..20 {
        for j in 0..20 {
            let z = -0.85 + 1.7 * i as f64 / 19.0;
            let um = 0.3 + 2.5 * j as f64 / 19.0;
            let y = (1.0 - z * z).sqrt();
            let p1 = Vec3::new(0.0, y, z);
            let p2 = Vec3::new(0.0, -y, z);
            let (axis, rate) = rotation_axis(um);
            let q1 = p1 - axis * axis.dot(&p1);
            let q2 = p2 - axis * axis.dot(&p2);
            // arc traversed in the +u rotation sense
            let phi = q1
                .cross(&q2)
                .dot(&axis)
                .atan2(q1.dot(&q2))
                .rem_euclid(2.0 * PI);
            let t_bang = phi / rate;
            let direct = z.acos() - t_bang;
            worst_b = worst_b.max((equatorial_gap_b(um, z) - direct).abs());
        }
    }

    // delta tau hat: bang-bang transit minus drift between x-matched points
    // flanking an equatorial junction (u_max = 1)
    let um = 1.0;
    for i in 0..20 {
        for j in 0..20 {
            let x = 0.05 + 0.4 * i as f64 / 19.0;
            let zq = -0.4 + 0.8 * j as f64 / 19.0;
            let rq = Vec3::new(0.0, (1.0 - zq * zq).sqrt(), zq);
            let (ax, rate) = rotation_axis(um);
            let back = |t: f64| rotate_about(&ax, -rate * t, &rq).x - x;
            let (axm, ratem) = rotation_axis(-um);
            let fwd = |t: f64| rotate_about(&axm, ratem * t, &rq).x - x;
            let mut hi = 1e-3;
            while back(hi) < 0.0 {
                hi += 1e-3;
            }
            let tm = brentq(back, 0.0, hi, 1e-15, 200).unwrap();
            hi = 1e-3;
            while fwd(hi) < 0.0 {
                hi += 1e-3;
            }
            let tp = brentq(fwd, 0.0, hi, 1e-15, 200).unwrap();
            let rmv = rotate_about(&ax, -rate * tm, &rq);
            let rpv = rotate_about(&axm, ratem * tp, &rq);
            let td = drift_time(&rmv, &rpv).unwrap();
            let direct = (tm + tp) - td;
            worst_hat = worst_hat.max((antiequatorial_gap(um, x, zq) - direct).abs());
        }
    }

    // needle timings against the direct construction at dtau = 1e-3
    let d = 1e-3;
    for i in 0..20 {
        for j in 0..20 {
            let x = -0.38 + 0.76 * i as f64 / 19.0;
            let z = -0.38 + 0.76 * j as f64 / 19.0;
            let r = Vec3::new(x, (1.0 - x * x - z * z).sqrt(), z);
            let t = needle_variation_timings(&r, 1.0, d);
            let (dp, d0) = needle_variation_measured(&r, 1.0, -1.0, d).unwrap();
            worst_needle = worst_needle.max((dp - t.dtau_plus).abs().max((d0 - t.dtau_zero).abs()));
        }
    }

    // sliding expansion: error scales at least cubically in dtau
    let mut worst_ratio = f64::INFINITY;
    let u_levels = [0.5, 1.5];
    for &um in &u_levels {
        for i in 0..6 {
            for j in 0..6 {
                let theta = PI + 0.15 + (PI - 0.3) * i as f64 / 5.0;
                let gamma = 0.5 + 1.2 * j as f64 / 5.0;
                let g = geometry_angles(theta, um);
                let err = |dtau: f64| {
                    let m = sliding_measured(um, g.xi, gamma, 1.0, dtau);
                    m.map(|m| (m - sliding_expansion(um, g.xi, g.eta, gamma, dtau)).abs())
                };
                if let (Some(e2), Some(e3)) = (err(1e-2), err(1e-3)) {
                    if e2 > 1e-12 {
                        worst_ratio = worst_ratio.min(e2 / e3.max(1e-18));
                    }
                }
            }
        }
    }

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = worst_a < 1e-8
        && worst_b < 1e-8
        && worst_hat < 1e-8
        && worst_needle < 1e-8
        && worst_ratio > 500.0
        && elapsed < 300.0;
    report(
        6,
        pass,
        &format!(
            "dTa {:.1e}, dTb {:.1e}, dtau-hat {:.1e}, needle {:.1e} (tol 1e-8); sliding error ratio {:.0} (want > 500); {:.1}s",
            worst_a, worst_b, worst_hat, worst_needle, worst_ratio, elapsed
        ),
    );
}

#[test]
fn criterion_7_long_horizon_scan() {
    let t0 = Instant::now();
    let u_max = 1.0f64;
    let t = 4.0 * PI * PI / u_max.atan();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut unresolved = 0usize;
    let mut non_loop_traps = 0usize;
    let mut total = 0usize;
    for _ in 0..20 {
        let r0 = random_unit(&mut rng);
        let o = random_unit(&mut rng);
        let problem = ControlProblem::new(r0, o, u_max, Mode::FixedT(t));
        let cfg = ScanConfig { starts: 200, bins: 256, max_iter: 400, seed: rng.gen(), reach_tol: 1e-6 };
        let rep = scan(&problem, t, &cfg);
        total += rep.outcomes.len();
        for out in &rep.outcomes {
            if !out.reached {
                unresolved += 1;
                if !out.perfect_loop {
                    non_loop_traps += 1;
                }
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = unresolved == 0 && non_loop_traps == 0 && elapsed < 1200.0;
    report(
        7,
        pass,
        &format!(
            "{} starts: {} unresolved, {} non-perfect-loop traps; {:.1}s",
            total, unresolved, non_loop_traps, elapsed
        ),
    );
}

#[test]
fn criterion_8_trap_persistence() {
    let mut lines = Vec::new();
    let mut pass = true;

    // fig 2a construction at u_max in {0.25, 1}: equatorial endpoints whose
    // time optimum is the singular drift, with bang-bang trap companions
    let frozen: [(f64, [f64; 2]); 2] =
        [(0.25, [1.664032, 1.942424]), (1.0, [1.034606, 1.196170])];
    for (u_max, dts) in frozen {
        let p = ControlProblem::new(
            Vec3::new(0.0, 1.0, -0.5),
            Vec3::new(0.0, 1.0, 1.0),
            u_max,
            Mode::TimeOptimal,
        );
        let (cl, _) = solve_classified(&p, 11);
        let trap_count = cl
            .iter()
            .filter(|c| matches!(c.category, Category::LoopTrap | Category::TopologicalTrap))
            .count();
        let frozen_found = cl.iter().any(|c| {
            let d: Vec<f64> = c.candidate.policy.segments.iter().map(|s| s.dt).collect();
            d.len() == 2
                && (d[0] - dts[0]).abs() < 1e-4
                && (d[1] - dts[1]).abs() < 1e-4
                && matches!(c.category, Category::LoopTrap | Category::TopologicalTrap)
        });
        pass = pass && trap_count >= 1 && frozen_found;
        lines.push(format!(
            "u_max={}: {} non-simple traps, frozen n=1 trap found: {}",
            u_max, trap_count, frozen_found
        ));
    }

    // fig 10 construction at u_max = 8: fixed-T problem with a topological
    // type II trap
    let p = ControlProblem::new(
        Vec3::new(0.5, 0.5, 8.0),
        Vec3::new(1.0, 0.0, 8.0),
        8.0,
        Mode::FixedT(0.312429),
    );
    let cands = enumerate_candidates(&p, &EnumerationConfig { n_max: 6, t_max: 3.0 });
    let cl = classify(&p, &cands, None, 1e-3).expect("classification");
    let trap_count = cl
        .iter()
        .filter(|c| matches!(c.category, Category::LoopTrap | Category::TopologicalTrap))
        .count();
    pass = pass && trap_count >= 1;
    lines.push(format!("u_max=8: {} non-simple traps", trap_count));

    report(8, pass, &lines.join("; "));
}
