//! Bloch-sphere kinematics for the two-level Landau-Zener system.
//!
//! Dynamics: dr/dtau = 2 h x r with h = (1, 0, u).  Each constant-u segment
//! is an exact rotation about (1, 0, u)/sqrt(1 + u^2) at angular rate
//! 2 sqrt(1 + u^2) = 2 sec(alpha), where alpha = arctan(u).

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// One constant-control segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub u: f64,
    pub dt: f64,
}

/// Piecewise-constant control policy.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlPolicy {
    pub segments: Vec<Segment>,
}

impl ControlPolicy {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn from_arcs(us: &[f64], dts: &[f64]) -> Self {
        assert_eq!(us.len(), dts.len());
        Self {
            segments: us.iter().zip(dts).map(|(&u, &dt)| Segment { u, dt }).collect(),
        }
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.dt).sum()
    }

    /// Drops zero-duration segments and merges adjacent segments with equal u.
    pub fn canonicalize(&self) -> ControlPolicy {
        let mut out: Vec<Segment> = Vec::new();
        for &s in &self.segments {
            if s.dt <= 0.0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.u == s.u => last.dt += s.dt,
                _ => out.push(s),
            }
        }
        ControlPolicy { segments: out }
    }

    /// Time-reversed policy with sign-flipped controls; maps the endpoint
    /// map g to its inverse conjugated by the symmetry P: (x,y,z) -> (x,-y,z).
    pub fn reversed(&self) -> ControlPolicy {
        ControlPolicy {
            segments: self.segments.iter().rev().copied().collect(),
        }
    }
}

/// Time-optimal or fixed-horizon problem mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    TimeOptimal,
    FixedT(f64),
}

/// Steering problem: r0 -> o under |u| <= u_max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub r0: Vec3,
    pub o: Vec3,
    pub u_max: f64,
    pub mode: Mode,
}

impl ControlProblem {
    pub fn new(r0: Vec3, o: Vec3, u_max: f64, mode: Mode) -> Self {
        Self {
            r0: r0.normalize(),
            o: o.normalize(),
            u_max,
            mode,
        }
    }

    /// Bang-arc tilt angle alpha = arctan(u_max).
    pub fn alpha(&self) -> f64 {
        self.u_max.atan()
    }
}

/// Unit rotation axis and angular rate for control value u.
pub fn rotation_axis(u: f64) -> (Vec3, f64) {
    let norm = (1.0 + u * u).sqrt();
    (Vec3::new(1.0, 0.0, u) / norm, 2.0 * norm)
}

/// Exact rotation matrix advancing the state by time dt under control u.
pub fn rotation_matrix(u: f64, dt: f64) -> Matrix3<f64> {
    let (axis, rate) = rotation_axis(u);
    let angle = rate * dt;
    let (s, c) = angle.sin_cos();
    let k = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// Rodrigues rotation of v by `angle` about unit `axis`.
pub fn rotate_about(axis: &Vec3, angle: f64, v: &Vec3) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v)) * (1.0 - c)
}

/// Advances r through one segment.
pub fn propagate_segment(r: &Vec3, seg: &Segment) -> Vec3 {
    let (axis, rate) = rotation_axis(seg.u);
    rotate_about(&axis, rate * seg.dt, r)
}

/// Endpoint of the policy started at r0.
pub fn propagate(r0: &Vec3, policy: &ControlPolicy) -> Vec3 {
    policy.segments.iter().fold(*r0, |r, s| propagate_segment(&r, s))
}

/// Trajectory sample.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPoint {
    pub tau: f64,
    pub u: f64,
    pub r: Vec3,
}

/// Samples the trajectory with `per_segment` interior points per segment,
/// always including segment boundaries.
pub fn propagate_policy(r0: &Vec3, policy: &ControlPolicy, per_segment: usize) -> Vec<TrajectoryPoint> {
    let mut out = vec![TrajectoryPoint {
        tau: 0.0,
        u: policy.segments.first().map_or(0.0, |s| s.u),
        r: *r0,
    }];
    let mut r = *r0;
    let mut tau = 0.0;
    for seg in &policy.segments {
        let (axis, rate) = rotation_axis(seg.u);
        let n = per_segment.max(1);
        for k in 1..=n {
            let dt = seg.dt * k as f64 / n as f64;
            out.push(TrajectoryPoint {
                tau: tau + dt,
                u: seg.u,
                r: rotate_about(&axis, rate * dt, &r),
            });
        }
        r = rotate_about(&axis, rate * seg.dt, &r);
        tau += seg.dt;
    }
    out
}

/// Terminal performance index J = r(T) . o, in [-1, 1].
pub fn performance_index(r_final: &Vec3, o: &Vec3) -> f64 {
    r_final.dot(o)
}

/// Normalized index j = (1 + J)/2, in [0, 1].
pub fn normalized_index(j: f64) -> f64 {
    (1.0 + j) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn axis_and_rate() {
        let (axis, rate) = rotation_axis(1.0);
        assert_relative_eq!(axis.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(rate, 2.0 * 2.0f64.sqrt(), epsilon = 1e-15);
        let (axis0, rate0) = rotation_axis(0.0);
        assert_eq!(axis0, Vec3::x());
        assert_eq!(rate0, 2.0);
    }

    #[test]
    fn drift_preserves_x() {
        let r = Vec3::new(0.3, -0.5, 0.81).normalize();
        let r2 = propagate_segment(&r, &Segment { u: 0.0, dt: 0.77 });
        assert_relative_eq!(r2.x, r.x, epsilon = 1e-14);
        assert_relative_eq!(r2.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn full_bang_loop_is_identity() {
        // one full rotation of a bang arc takes pi cos(alpha)
        let u_max = 2.0f64;
        let alpha = u_max.atan();
        let r = Vec3::new(0.1, 0.7, -0.7).normalize();
        let r2 = propagate_segment(&r, &Segment { u: u_max, dt: std::f64::consts::PI * alpha.cos() });
        assert_relative_eq!((r2 - r).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn canonicalize_merges() {
        let p = ControlPolicy::from_arcs(&[1.0, 1.0, -1.0, 0.5], &[0.1, 0.2, 0.0, 0.3]);
        let c = p.canonicalize();
        assert_eq!(c.segments.len(), 2);
        assert_relative_eq!(c.segments[0].dt, 0.3, epsilon = 1e-15);
    }
}
