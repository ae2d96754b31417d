//! Control variations and comparison-time gaps: needle (McShane) variation
//! timings, sliding corner variations, and the equatorial / antiequatorial
//! travel-time differences used to certify singular-arc optimality.

use crate::bloch::{rotate_about, rotation_axis, Vec3};
use crate::num::brentq;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Needle-variation timings at a corner state r with incoming bang u_minus:
/// for a given backward offset dtau_minus, the forward offset dtau_plus that
/// restores the x-coordinate and the free-evolution time dtau_zero between
/// the two offset states, to second order.  The time defect
/// dtau_zero - dtau_plus - dtau_minus = 2 u_minus dtau_minus^2 r_x / r_y
/// must be nonnegative on a locally time-optimal extremal.
#[derive(Debug, Clone, Copy)]
pub struct NeedleTimings {
    pub dtau_plus: f64,
    pub dtau_zero: f64,
    pub defect: f64,
}

pub fn needle_variation_timings(r: &Vec3, u_minus: f64, dtau_minus: f64) -> NeedleTimings {
    let d = dtau_minus;
    let dtau_plus = d * (r.y + 2.0 * d * r.z) / r.y;
    let dtau_zero = 2.0 * d * (d * (u_minus * r.x + r.z) + r.y) / r.y;
    NeedleTimings {
        dtau_plus,
        dtau_zero,
        defect: 2.0 * u_minus * d * d * r.x / r.y,
    }
}

/// Direct construction of the needle timings: back-propagates the corner by
/// dtau_minus along the incoming bang, then finds the outgoing bang offset
/// restoring x and the exact drift time between the offset states.
pub fn needle_variation_measured(
    r: &Vec3,
    u_minus: f64,
    u_plus: f64,
    dtau_minus: f64,
) -> Option<(f64, f64)> {
    let (axm, rm) = rotation_axis(u_minus);
    let (axp, rp) = rotation_axis(u_plus);
    let r_back = rotate_about(&axm, -rm * dtau_minus, r);
    let f = |dt: f64| rotate_about(&axp, rp * dt, r).x - r_back.x;
    let dtau_plus = brentq(f, 0.0, 8.0 * dtau_minus + 1e-6, 1e-15, 200)?;
    let r_fwd = rotate_about(&axp, rp * dtau_plus, r);
    let dtau_zero = drift_time(&r_back, &r_fwd)?;
    Some((dtau_plus, dtau_zero))
}

/// Minimal free-evolution (u = 0) time from `a` to `b`; None when the two
/// states differ in x.
pub fn drift_time(a: &Vec3, b: &Vec3) -> Option<f64> {
    if (a.x - b.x).abs() > 1e-7 {
        return None;
    }
    let pa = Vec3::new(0.0, a.y, a.z);
    let pb = Vec3::new(0.0, b.y, b.z);
    if pa.norm() < 1e-12 {
        return Some(0.0);
    }
    // drift rotates by angle 2 t about +x
    let ang = (pa.y * pb.z - pa.z * pb.y).atan2(pa.dot(&pb)).rem_euclid(2.0 * PI);
    Some(ang / 2.0)
}

/// Third-order coefficient of the sliding expansion.
pub fn sliding_q3(u_max: f64, xi: f64, eta: f64, gamma: f64, q: f64) -> f64 {
    let te = (eta / 2.0).tan();
    u_max * u_max * (xi / 2.0).cos() / 3.0
        * (2.0 / ((eta / 2.0).cos().powi(2))
            - 3.0 * q * q * te.powi(4)
            - 6.0 / gamma.tan() * (te + (q + 1.0) * te.powi(3)))
}

/// Sliding-variation series: the locus-parameter shift delta-gamma produced
/// by trading dtau of the incoming arc duration to the outgoing one while
/// staying on the corner locus, expanded to third order in dtau.
pub fn sliding_expansion(u_max: f64, xi: f64, eta: f64, gamma: f64, dtau: f64) -> f64 {
    let q = 1.0 / gamma.tan().powi(2) - 1.0 / (eta / 2.0).tan().powi(2);
    2.0 * (xi / 2.0).cos() * dtau - ((xi / 2.0).sin().powi(3) / u_max).abs() * q * dtau * dtau
        + sliding_q3(u_max, xi, eta, gamma, q) * dtau.powi(3)
}

/// Direct construction of the sliding shift: splits dtau between the two
/// bang controls at a corner on the (gamma, xi) locus so that the displaced
/// point stays on the locus plane, and returns the measured delta-gamma.
pub fn sliding_measured(u_max: f64, xi: f64, gamma: f64, s: f64, dtau: f64) -> Option<f64> {
    let ri = crate::synthesis::corner_locus(gamma, xi, s);
    let (u_minus, u_plus) = (-s * u_max, s * u_max);
    let (axm, rm) = rotation_axis(u_minus);
    let (axp, rp) = rotation_axis(u_plus);
    let nrm = Vec3::new((xi / 2.0).cos(), s * (xi / 2.0).sin(), 0.0);
    let place = |x: f64| {
        let mid = rotate_about(&axm, rm * x, &ri);
        rotate_about(&axp, rp * (dtau - x), &mid)
    };
    let x = brentq(|x| place(x).dot(&nrm), -dtau.abs(), 2.0 * dtau.abs() + 1e-9, 1e-15, 200)?;
    let p = place(x);
    Some(((-p.y / (xi / 2.0).cos()).atan2(p.z)) - gamma)
}

/// Quadratic form of the second-order sliding criterion on n corners:
/// Q_kj = delta_kj q_k + q_n, acting on the first n-1 independent duration
/// variations (the last is fixed by sum dtau_i = 0).
pub fn q_form(qs: &[f64]) -> DMatrix<f64> {
    let n = qs.len();
    assert!(n >= 2);
    let qn = qs[n - 1];
    DMatrix::from_fn(n - 1, n - 1, |k, j| if k == j { qs[k] + qn } else { qn })
}

/// Travel-time gap between the minimal two-bang connection and the singular
/// drift between equatorial points with r_y of equal signs (closed form).
pub fn equatorial_gap_a(u_max: f64, rm_z: f64, rp_z: f64) -> f64 {
    let alpha = u_max.atan();
    let (ca, sa) = (alpha.cos(), alpha.sin());
    let dz = rp_z - rm_z;
    ca * ((((dz / 2.0) / ca - ca * rp_z) / (1.0 - sa * sa * rp_z * rp_z).sqrt()).asin()
        + (ca * rp_z / (1.0 - sa * sa * rp_z * rp_z).sqrt()).asin()
        - (ca * rm_z / (1.0 - sa * sa * rm_z * rm_z).sqrt()).asin()
        + (((dz / 2.0) / ca + ca * rm_z) / (1.0 - sa * sa * rm_z * rm_z).sqrt()).asin())
        - rp_z.asin()
        + rm_z.asin()
}

/// Travel-time gap between the pole-crossing drift route and the direct
/// bang arc for endpoints with r_y of opposite signs (closed form).
pub fn equatorial_gap_b(u_max: f64, rp_z: f64) -> f64 {
    let alpha = u_max.atan();
    let (ca, sa) = (alpha.cos(), alpha.sin());
    rp_z.acos() - ca * (rp_z * ca / (1.0 - rp_z * rp_z * sa * sa).sqrt()).clamp(-1.0, 1.0).acos()
}

/// Antiequatorial lemma gap: bang-bang transit time minus the drift time
/// between x-matched points on the two arcs flanking a junction on x = 0
/// (closed form; negative, i.e. the bang route is faster).
pub fn antiequatorial_gap(u_max: f64, rm_x: f64, rpz: f64) -> f64 {
    let alpha = u_max.atan();
    let x = rm_x;
    let z = rpz;
    let mut total = 0.0;
    for s in [1.0, -1.0] {
        total += ((s * z - x / alpha.tan()) / (1.0 - x * x).sqrt()).asin()
            + ((x / alpha.sin() - s * z * alpha.cos()) / (1.0 - z * z * alpha.sin().powi(2)).sqrt())
                .asin()
                / (alpha.tan().powi(2) + 1.0).sqrt();
    }
    total / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn drift_time_quarter_turn() {
        let a = Vec3::new(0.0, 1.0, 0.0);
        let b = Vec3::new(0.0, 0.0, 1.0);
        assert_relative_eq!(drift_time(&a, &b).unwrap(), PI / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn needle_defect_sign() {
        // V-shaped corner with u^- r_x r_y > 0: defect positive
        let r = Vec3::new(0.3, 0.8, 0.5).normalize();
        let t = needle_variation_timings(&r, 1.0, 1e-3);
        assert!(t.defect > 0.0);
        // measured timings agree to second order
        let (dp, d0) = needle_variation_measured(&r, 1.0, -1.0, 1e-3).unwrap();
        assert_relative_eq!(dp, t.dtau_plus, epsilon = 1e-8);
        assert_relative_eq!(d0, t.dtau_zero, epsilon = 1e-8);
    }

    #[test]
    fn q_form_shape() {
        let m = q_form(&[1.0, 2.0, 3.0]);
        assert_eq!(m.nrows(), 2);
        assert_relative_eq!(m[(0, 0)], 4.0);
        assert_relative_eq!(m[(0, 1)], 3.0);
        assert_relative_eq!(m[(1, 1)], 5.0);
    }

    #[test]
    fn equatorial_gap_a_vanishes_at_zero_separation() {
        assert_relative_eq!(equatorial_gap_a(0.7, 0.3, 0.3), 0.0, epsilon = 1e-12);
        assert!(equatorial_gap_a(0.7, 0.1, 0.4) > 0.0);
    }

    #[test]
    fn equatorial_gap_b_vanishes_at_pole() {
        assert_relative_eq!(equatorial_gap_b(0.7, 1.0), 0.0, epsilon = 1e-12);
        assert!(equatorial_gap_b(0.7, 0.4) > 0.0);
    }
}
