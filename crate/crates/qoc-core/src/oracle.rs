//! Direct numerical oracle, independent of the extremal synthesis: projected
//! gradient ascent of J over piecewise-constant controls on a uniform time
//! grid, and minimum-time search by bisection over the horizon.

use crate::bloch::{rotate_about, rotation_axis, ControlPolicy, ControlProblem, Segment, Vec3};
use crate::num::nelder_mead;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Grid-based control: `bins` values of u on a uniform grid over [0, T].
#[derive(Debug, Clone)]
pub struct GridPolicy {
    pub t: f64,
    pub u: Vec<f64>,
}

impl GridPolicy {
    pub fn dt(&self) -> f64 {
        self.t / self.u.len() as f64
    }

    pub fn to_policy(&self) -> ControlPolicy {
        let dt = self.dt();
        ControlPolicy {
            segments: self.u.iter().map(|&u| Segment { u, dt }).collect(),
        }
    }

    pub fn propagate(&self, r0: &Vec3) -> Vec3 {
        let dt = self.dt();
        let mut r = *r0;
        for &u in &self.u {
            let (axis, rate) = rotation_axis(u);
            r = rotate_about(&axis, rate * dt, &r);
        }
        r
    }
}

/// Ascent outcome.
#[derive(Debug, Clone)]
pub struct AscentResult {
    pub j: f64,
    pub policy: GridPolicy,
    pub iterations: usize,
    pub converged: bool,
}

/// Continuous-time gradient of J with respect to each bin value: the
/// switching function integrated over the bin (midpoint rule).
fn gradient(problem: &ControlProblem, gp: &GridPolicy) -> Vec<f64> {
    let n = gp.u.len();
    let dt = gp.dt();
    let mut states = Vec::with_capacity(n + 1);
    let mut r = problem.r0;
    states.push(r);
    for &u in &gp.u {
        let (axis, rate) = rotation_axis(u);
        r = rotate_about(&axis, rate * dt, &r);
        states.push(r);
    }
    let mut a = problem.o;
    let mut grad = vec![0.0; n];
    for k in (0..n).rev() {
        let (axis, rate) = rotation_axis(gp.u[k]);
        // midpoint values of state and costate inside the bin
        let rm = rotate_about(&axis, rate * dt / 2.0, &states[k]);
        let am = rotate_about(&axis, -rate * dt / 2.0, &a);
        grad[k] = dt * 2.0 * rm.cross(&am).z;
        a = rotate_about(&axis, -rate * dt, &a);
    }
    grad
}

/// Projected gradient ascent with backtracking line search; monotone in J.
pub fn gradient_local_search(
    problem: &ControlProblem,
    start: &GridPolicy,
    max_iter: usize,
) -> AscentResult {
    let u_max = problem.u_max;
    let mut gp = start.clone();
    let mut j = gp.propagate(&problem.r0).dot(&problem.o);
    let mut step = 0.5;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        iterations += 1;
        let g = gradient(problem, &gp);
        let gnorm2: f64 = g.iter().map(|x| x * x).sum();
        if gnorm2.sqrt() < 1e-12 {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial = GridPolicy {
                t: gp.t,
                u: gp
                    .u
                    .iter()
                    .zip(&g)
                    .map(|(&u, &gk)| (u + step * gk).clamp(-u_max, u_max))
                    .collect(),
            };
            let jt = trial.propagate(&problem.r0).dot(&problem.o);
            if jt > j {
                gp = trial;
                let gain = jt - j;
                j = jt;
                step *= 1.6;
                improved = true;
                if gain < 1e-14 {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    AscentResult { j, policy: gp, iterations, converged }
}

/// Multi-start fixed-horizon grid maximization of J (unrestricted
/// piecewise-constant paranoid mode).
pub fn grid_max_j_fixed_t(
    problem: &ControlProblem,
    t: f64,
    bins: usize,
    starts: usize,
    seed: u64,
) -> AscentResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_max = problem.u_max;
    let mut best: Option<AscentResult> = None;
    for k in 0..starts {
        let u: Vec<f64> = match k {
            0 => vec![0.0; bins],
            1 => vec![u_max; bins],
            2 => vec![-u_max; bins],
            _ => (0..bins).map(|_| rng.gen_range(-u_max..=u_max)).collect(),
        };
        let res = gradient_local_search(problem, &GridPolicy { t, u }, 400);
        if best.as_ref().map_or(true, |b| res.j > b.j) {
            best = Some(res);
        }
        if best.as_ref().unwrap().j > 1.0 - 1e-9 {
            break;
        }
    }
    best.unwrap()
}

/// Best policy found by a direct search, with its achieved index and time.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_policy: ControlPolicy,
    pub best_j: f64,
    pub best_t: f64,
    pub grid_resolution: f64,
    pub restarts: usize,
}

/// Raised when no admissible policy attains the endpoint residual tolerance
/// within the search budget.
#[derive(Debug, thiserror::Error)]
#[error("oracle: target not reached within search budget")]
pub struct TargetUnreached;

fn propagate_arcs(r0: &Vec3, us: &[f64], ds: &[f64]) -> Vec3 {
    let mut r = *r0;
    for (&u, &d) in us.iter().zip(ds) {
        let (axis, rate) = rotation_axis(u);
        r = rotate_about(&axis, rate * d.abs(), &r);
    }
    r
}

fn arcs_to_policy(us: &[f64], ds: &[f64]) -> ControlPolicy {
    ControlPolicy {
        segments: us
            .iter()
            .zip(ds)
            .map(|(&u, &d)| Segment { u, dt: d.abs() })
            .filter(|s| s.dt > 1e-12)
            .collect(),
    }
    .canonicalize()
}

/// All bang/singular arc-sign sequences of length m with no repeated
/// neighbor, levels {-u_max, 0, +u_max}.
fn sign_patterns(u_max: f64, m: usize) -> Vec<Vec<f64>> {
    let levels = [-u_max, 0.0, u_max];
    let mut out: Vec<Vec<f64>> = levels.iter().map(|&l| vec![l]).collect();
    for _ in 1..m {
        let mut next = Vec::new();
        for p in &out {
            let last = *p.last().unwrap();
            for &l in &levels {
                if l != last {
                    let mut q = p.clone();
                    q.push(l);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

fn random_pattern(rng: &mut ChaCha8Rng, u_max: f64, n_max: usize) -> Vec<f64> {
    let m = rng.gen_range(1..=n_max + 1);
    let levels = [-u_max, 0.0, u_max];
    let mut us = vec![levels[rng.gen_range(0..3)]];
    while us.len() < m {
        let l = levels[rng.gen_range(0..3)];
        if l != *us.last().unwrap() {
            us.push(l);
        }
    }
    us
}

/// Direct minimum-time search over bang-singular switching sequences with up
/// to `n_max` switchings: multi-start Nelder-Mead feasibility solve followed
/// by time minimization under a ramped feasibility penalty.
pub fn oracle_min_time(
    problem: &ControlProblem,
    n_max: usize,
    resolution: f64,
    restarts: usize,
    seed: u64,
) -> Result<OracleResult, TargetUnreached> {
    let o = problem.o;
    let r0 = problem.r0;
    if (r0.dot(&o) - 1.0).abs() < 1e-12 {
        return Ok(OracleResult {
            best_policy: ControlPolicy { segments: vec![] },
            best_j: 1.0,
            best_t: 0.0,
            grid_resolution: resolution,
            restarts: 0,
        });
    }
    let loop_len = std::f64::consts::PI * problem.alpha().cos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patterns: Vec<Vec<f64>> = Vec::new();
    for m in 1..=(n_max + 1).min(4) {
        patterns.extend(sign_patterns(problem.u_max, m));
    }
    // longer sequences: pure alternating bangs and singular-opened variants
    for m in 5..=(n_max + 1).max(5) {
        for s in [1.0, -1.0] {
            let alt: Vec<f64> =
                (0..m).map(|i| s * problem.u_max * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            patterns.push(alt.clone());
            let mut opened = vec![0.0];
            opened.extend(alt.iter().take(m - 1));
            patterns.push(opened);
        }
    }
    for _ in 0..restarts {
        patterns.push(random_pattern(&mut rng, problem.u_max, n_max));
    }
    let mut best: Option<(Vec<f64>, DVector<f64>, f64)> = None;
    for us in &patterns {
        let m = us.len();
        let resid = |d: &DVector<f64>| (propagate_arcs(&r0, us, d.as_slice()) - o).norm();
        let attempts = if m <= 3 { 8 } else { 3 };
        for _attempt in 0..attempts {
            let d0 = DVector::from_fn(m, |_, _| rng.gen_range(0.005..loop_len));
            let (mut d, r1) = nelder_mead(resid, &d0, 0.4, 800, 1e-15);
            if r1 > 1e-5 {
                continue;
            }
            for w in [1e2, 1e4, 1e6, 1e8] {
                let cost = |d: &DVector<f64>| {
                    let t: f64 = d.iter().map(|x| x.abs()).sum();
                    let r = resid(d);
                    t + w * r * r
                };
                d = nelder_mead(cost, &d, 0.05, 1200, 1e-15).0;
            }
            let (d, rf) = nelder_mead(resid, &d, 1e-4, 400, 1e-16);
            if rf > 1e-7 {
                continue;
            }
            let t: f64 = d.iter().map(|x| x.abs()).sum();
            if best.as_ref().map_or(true, |b| t < b.2) {
                best = Some((us.clone(), d, t));
            }
        }
    }
    let (us, mut d, mut t) = best.ok_or(TargetUnreached)?;
    // polish: continue the penalty descent from the incumbent with a tight
    // simplex, keeping only feasible improvements
    let resid = |dv: &DVector<f64>| (propagate_arcs(&r0, &us, dv.as_slice()) - o).norm();
    for _ in 0..3 {
        let mut trial = d.clone();
        for w in [1e6, 1e8, 1e10] {
            let cost = |dv: &DVector<f64>| {
                let tt: f64 = dv.iter().map(|x| x.abs()).sum();
                let r = resid(dv);
                tt + w * r * r
            };
            trial = nelder_mead(cost, &trial, 0.01, 1500, 1e-16).0;
        }
        let (tp, rf) = nelder_mead(&resid, &trial, 1e-5, 400, 1e-16);
        let tt: f64 = tp.iter().map(|x| x.abs()).sum();
        if rf < 1e-7 && tt < t {
            d = tp;
            t = tt;
        } else {
            break;
        }
    }
    let policy = arcs_to_policy(&us, d.as_slice());
    let j = propagate_arcs(&r0, &us, d.as_slice()).dot(&o);
    Ok(OracleResult {
        best_policy: policy,
        best_j: j,
        best_t: t,
        grid_resolution: resolution,
        restarts: patterns.len(),
    })
}

/// Direct fixed-horizon maximization of the normalized index over
/// bang-singular sequences; durations live on the simplex sum d_i = T via a
/// squared-coordinate parametrization.
pub fn oracle_max_j_direct(
    problem: &ControlProblem,
    t: f64,
    n_max: usize,
    restarts: usize,
    seed: u64,
) -> OracleResult {
    let o = problem.o;
    let r0 = problem.r0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patterns: Vec<Vec<f64>> = Vec::new();
    for m in 1..=(n_max + 1).min(4) {
        patterns.extend(sign_patterns(problem.u_max, m));
    }
    for _ in 0..restarts {
        patterns.push(random_pattern(&mut rng, problem.u_max, n_max));
    }
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for us in &patterns {
        let m = us.len();
        let to_durations = |x: &DVector<f64>| {
            let s: f64 = x.iter().map(|v| v * v).sum();
            if s < 1e-300 {
                return vec![t / m as f64; m];
            }
            x.iter().map(|v| t * v * v / s).collect::<Vec<f64>>()
        };
        let cost = |x: &DVector<f64>| {
            let ds = to_durations(x);
            -propagate_arcs(&r0, us, &ds).dot(&o)
        };
        let x0 = DVector::from_fn(m, |_, _| rng.gen_range(0.3..1.0));
        let (x, fx) = nelder_mead(cost, &x0, 0.3, 1500, 1e-15);
        let j = -fx;
        if best.as_ref().map_or(true, |b| j > b.2) {
            best = Some((us.clone(), to_durations(&x), j));
        }
        if j > 1.0 - 1e-12 {
            break;
        }
    }
    let (us, ds, j) = best.unwrap();
    OracleResult {
        best_policy: arcs_to_policy(&us, &ds),
        best_j: j,
        best_t: t,
        grid_resolution: 0.0,
        restarts: patterns.len(),
    }
}
