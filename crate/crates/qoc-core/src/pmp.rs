//! Pontryagin maximum principle machinery: costate propagation, switching
//! function, corner coefficients, and first-order extremality checks.
//!
//! The costate a obeys the same rotation dynamics as the state.  The
//! Pontryagin function is K = 2 (a x r) . (1, 0, u); its z-sensitivity
//! chi = 2 (a x r)_z is the switching function, and the bang law is
//! u = u_max sign(chi).  Along a bang arc K is conserved; at corners
//! chi = 0 and the in-plane coefficients c1 = 2 (a x r)_x, c2 = 2 (a x r)_y
//! obey c1 -> c1, c2 -> -c2 across the switch.

use crate::bloch::{
    propagate_segment, rotate_about, rotation_axis, rotation_matrix, ControlPolicy,
    ControlProblem, Vec3,
};
use crate::num::lstsq;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Pontryagin function K(r, a, u) = 2 (a x r) . (1, 0, u).
pub fn pontryagin_k(r: &Vec3, a: &Vec3, u: f64) -> f64 {
    let c = a.cross(r);
    2.0 * (c.x + u * c.z)
}

/// Switching function chi = 2 (a x r)_z.
pub fn switching_function(r: &Vec3, a: &Vec3) -> f64 {
    2.0 * a.cross(r).z
}

/// Corner coefficients (c1, c2) = 2 ((a x r)_x, (a x r)_y).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CornerCoefficients {
    pub c1: f64,
    pub c2: f64,
}

/// Relative corner tolerance on |chi|.
pub const CORNER_TOL: f64 = 1e-8;

/// Extracts (c1, c2) at a corner; fails if chi is not negligible there.
pub fn corner_coefficients(r: &Vec3, a: &Vec3) -> Result<CornerCoefficients, f64> {
    let c = a.cross(r);
    let chi = 2.0 * c.z;
    if chi.abs() > CORNER_TOL * (2.0 * c.norm()).max(1e-30) {
        return Err(chi);
    }
    Ok(CornerCoefficients { c1: 2.0 * c.x, c2: 2.0 * c.y })
}

/// Interior bang-arc duration from corner coefficients (in tau units).
/// For c1 > 0 the arc lasts pi cos(alpha) minus the offset
/// arctan(|c2/(c1 u_max)| sec(alpha)) cos(alpha); the degenerate c1 = 0
/// case gives exactly (pi/2) cos(alpha) and is flagged.
#[derive(Debug, Clone, Copy)]
pub struct InteriorArcDuration {
    pub dt: f64,
    pub c1_degenerate: bool,
}

pub fn interior_arc_duration(c: &CornerCoefficients, u_max: f64) -> InteriorArcDuration {
    let cos_a = u_max.atan().cos();
    let scale = (2.0 * (c.c1 * c.c1 + c.c2 * c.c2).sqrt()).max(1e-30);
    if c.c1.abs() < 1e-12 * scale {
        return InteriorArcDuration { dt: std::f64::consts::FRAC_PI_2 * cos_a, c1_degenerate: true };
    }
    let offset = ((c.c2 / (c.c1 * u_max)).abs() / cos_a).atan() * cos_a;
    let dt = if c.c1 > 0.0 {
        std::f64::consts::PI * cos_a - offset
    } else {
        offset
    };
    InteriorArcDuration { dt, c1_degenerate: false }
}

/// Costate values at segment boundaries, backward from a(T) = a_final.
/// Returned in forward order: a(t_0), a(t_1), ..., a(T).
pub fn costate_propagate(a_final: &Vec3, policy: &ControlPolicy) -> Vec<Vec3> {
    let mut out = vec![*a_final];
    let mut a = *a_final;
    for seg in policy.segments.iter().rev() {
        let (axis, rate) = rotation_axis(seg.u);
        a = rotate_about(&axis, -rate * seg.dt, &a);
        out.push(a);
    }
    out.reverse();
    out
}

/// Endpoint sensitivity columns M_i = d r(T) / d dt_i for each segment.
/// M_i = S_i (2 h_i x r_{i+1}) with S_i the product of the downstream
/// rotations and r_{i+1} the state at the end of segment i.
pub fn duration_jacobian(r0: &Vec3, policy: &ControlPolicy) -> Vec<Vec3> {
    let n = policy.segments.len();
    let mut r = *r0;
    let mut vels = Vec::with_capacity(n);
    for seg in &policy.segments {
        r = propagate_segment(&r, seg);
        let h = Vec3::new(1.0, 0.0, seg.u);
        vels.push(2.0 * h.cross(&r));
    }
    // apply downstream rotations back to front
    let mut cols = vec![Vec3::zeros(); n];
    let mut acc = nalgebra::Matrix3::identity();
    for i in (0..n).rev() {
        cols[i] = acc * vels[i];
        acc *= rotation_matrix(policy.segments[i].u, policy.segments[i].dt);
    }
    cols
}

/// Recovers the terminal costate of a target-reaching bang-bang extremal by
/// solving a(T) . M_i = -1 for every segment in least squares; the residual
/// tells whether a conserved-K costate exists at all.  The normalization
/// makes K = +1 along the whole policy.
pub struct CostateRecovery {
    pub a_final: Vec3,
    pub residual: f64,
}

pub fn recover_costate(r0: &Vec3, policy: &ControlPolicy) -> CostateRecovery {
    let cols = duration_jacobian(r0, policy);
    let n = cols.len();
    let mut m = DMatrix::zeros(n, 3);
    for (i, c) in cols.iter().enumerate() {
        m[(i, 0)] = c.x;
        m[(i, 1)] = c.y;
        m[(i, 2)] = c.z;
    }
    let b = DVector::from_element(n, -1.0);
    let sol = lstsq(&m, &b);
    let a_final = Vec3::new(sol[0], sol[1], sol[2]);
    let residual = (&m * sol - b).norm();
    CostateRecovery { a_final, residual }
}

/// First-order extremality diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalDiagnostics {
    pub is_extremal: bool,
    /// True when the costate was recovered from the conserved-K condition
    /// (target-reaching candidate); false for the deadlock normalization
    /// a(T) = o.
    pub kinematic_costate: bool,
    pub a_final: [f64; 3],
    /// Least-squares residual of the conserved-K system, or the largest
    /// stationarity violation |o . M_i| for deadlocks.
    pub costate_residual: f64,
    /// Minimum over bang arcs of sign(u) * chi at interior samples; a
    /// genuine extremal has margin >= 0 up to roundoff.
    pub chi_margin: f64,
    /// Largest |chi| at a corner, relative to the corner tolerance scale.
    pub worst_corner_chi: f64,
    /// Spread of K across arcs.
    pub k_spread: f64,
    pub corner_coefficients: Vec<(f64, f64)>,
}

const SAMPLES_PER_ARC: usize = 64;

/// Checks the Pontryagin necessary conditions along a bang-bang policy.
///
/// Target-reaching candidates get a kinematically recovered costate; a
/// policy whose endpoint misses o is treated as a deadlock candidate with
/// a(T) = o, and the duration-stationarity residuals o . M_i are reported.
pub fn extremal_check(problem: &ControlProblem, policy: &ControlPolicy) -> ExtremalDiagnostics {
    let r_final = crate::bloch::propagate(&problem.r0, policy);
    let reaches = (r_final.dot(&problem.o) - 1.0).abs() < 1e-6;
    if policy.segments.is_empty() {
        return ExtremalDiagnostics {
            is_extremal: reaches,
            kinematic_costate: reaches,
            a_final: [problem.o.x, problem.o.y, problem.o.z],
            costate_residual: 0.0,
            chi_margin: 0.0,
            worst_corner_chi: 0.0,
            k_spread: 0.0,
            corner_coefficients: Vec::new(),
        };
    }

    let (a_final, residual, kinematic) = if reaches {
        let rec = recover_costate(&problem.r0, policy);
        (rec.a_final, rec.residual, true)
    } else {
        let cols = duration_jacobian(&problem.r0, policy);
        let resid = cols.iter().map(|c| problem.o.dot(c).abs()).fold(0.0, f64::max);
        (problem.o, resid, false)
    };

    let costates = costate_propagate(&a_final, policy);
    let mut chi_margin = f64::INFINITY;
    let mut worst_corner = 0.0f64;
    let mut k_values = Vec::new();
    let mut corners = Vec::new();

    let mut r = problem.r0;
    for (i, seg) in policy.segments.iter().enumerate() {
        let (axis, rate) = rotation_axis(seg.u);
        let (caxis, crate_) = (axis, rate);
        let a0 = costates[i];
        k_values.push(pontryagin_k(&r, &a0, seg.u));
        let s = seg.u.signum();
        for k in 1..=SAMPLES_PER_ARC {
            let dt = seg.dt * k as f64 / (SAMPLES_PER_ARC + 1) as f64;
            let rs = rotate_about(&caxis, crate_ * dt, &r);
            let as_ = rotate_about(&caxis, crate_ * dt, &a0);
            let chi = switching_function(&rs, &as_);
            if seg.u != 0.0 {
                // landscape gradient wrt u is -chi under the deadlock
                // costate a(T) = o; under the kinematic recovery the
                // normalization K = +1 orients chi itself
                let m = if kinematic { s * chi } else { -s * chi };
                chi_margin = chi_margin.min(m);
            } else {
                chi_margin = chi_margin.min(-chi.abs() + 1e-9);
            }
        }
        r = rotate_about(&caxis, crate_ * seg.dt, &r);
        if i + 1 < policy.segments.len() {
            let a1 = costates[i + 1];
            let c = a1.cross(&r);
            let scale = (2.0 * c.norm()).max(1e-30);
            worst_corner = worst_corner.max((2.0 * c.z).abs() / scale);
            corners.push((2.0 * c.x, 2.0 * c.y));
        }
    }
    if policy.segments.is_empty() {
        k_values.push(0.0);
        chi_margin = 0.0;
    }

    let kmax = k_values.iter().cloned().fold(f64::MIN, f64::max);
    let kmin = k_values.iter().cloned().fold(f64::MAX, f64::min);
    let k_spread = kmax - kmin;

    let resid_tol = 1e-5;
    let is_extremal = residual < resid_tol && chi_margin > -1e-6 && worst_corner < 1e-5;

    ExtremalDiagnostics {
        is_extremal,
        kinematic_costate: kinematic,
        a_final: [a_final.x, a_final.y, a_final.z],
        costate_residual: residual,
        chi_margin,
        worst_corner_chi: worst_corner,
        k_spread,
        corner_coefficients: corners,
    }
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
    fn corner_map_negates_c2() {
        // Eq.-17 behavior: across a switch c1 is preserved, c2 flips sign.
        let p = fig9_problem();
        let blue = ControlPolicy::from_arcs(
            &[0.25, -0.25, 0.25, -0.25, 0.25],
            &[0.336822, 1.779299, 1.779299, 1.779299, 0.336822],
        );
        let d = extremal_check(&p, &blue);
        assert!(d.is_extremal, "blue should pass: {:?}", d);
        for w in d.corner_coefficients.windows(2) {
            assert_relative_eq!(w[0].0, w[1].0, epsilon = 1e-4);
            assert_relative_eq!(w[0].1, -w[1].1, epsilon = 1e-4);
        }
        // published magnitude |c2| = 0.899884 for the 6-switch solution
        assert_relative_eq!(d.corner_coefficients[0].1.abs(), 0.899884, epsilon = 1e-4);
    }

    #[test]
    fn interior_duration_limits() {
        let cos_a = std::f64::consts::FRAC_PI_4.cos();
        let d = interior_arc_duration(&CornerCoefficients { c1: 0.0, c2: 1.0 }, 1.0);
        assert!(d.c1_degenerate);
        assert_relative_eq!(d.dt, std::f64::consts::FRAC_PI_2 * cos_a, epsilon = 1e-14);
        let d2 = interior_arc_duration(&CornerCoefficients { c1: 1.0, c2: 0.0 }, 1.0);
        assert_relative_eq!(d2.dt, std::f64::consts::PI * cos_a, epsilon = 1e-14);
    }

    #[test]
    fn deadlock_costate_is_target() {
        // single-bang deadlock of the fig9 problem stalls at dt = 0.230837
        let p = fig9_problem();
        let red = ControlPolicy::from_arcs(&[0.25], &[0.230837]);
        let d = extremal_check(&p, &red);
        assert!(!d.kinematic_costate);
        assert!(d.costate_residual < 1e-4, "residual {}", d.costate_residual);
    }
}
