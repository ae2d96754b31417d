//! JSON report shapes emitted by `solve` and `scan`.

use qoc_core::classify::{Category, Classified, SelfIntersection, SwitchingBounds};
use qoc_core::pmp::ExtremalDiagnostics;
use qoc_core::synthesis::Descriptor;
use qoc_core::{ControlProblem, Mode};
use serde::Serialize;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct ProblemEcho {
    pub u_max: f64,
    pub r0: [f64; 3],
    pub o: [f64; 3],
    pub mode: String,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl From<&ControlProblem> for ProblemEcho {
    fn from(p: &ControlProblem) -> Self {
        let (mode, t) = match p.mode {
            Mode::TimeOptimal => ("time-optimal".into(), None),
            Mode::FixedT(t) => ("fixed-t".into(), Some(t)),
        };
        ProblemEcho {
            u_max: p.u_max,
            r0: [p.r0.x, p.r0.y, p.r0.z],
            o: [p.o.x, p.o.y, p.o.z],
            mode,
            t,
        }
    }
}

#[derive(Serialize)]
pub struct OracleSummary {
    pub best_j: f64,
    pub best_t: f64,
    pub grid_resolution: f64,
    pub restarts: usize,
}

#[derive(Serialize)]
pub struct CandidateReport {
    pub descriptor: Descriptor,
    pub durations: Vec<f64>,
    pub controls: Vec<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub category: Category,
    pub reaches_target: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ExtremalDiagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub q_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_intersection: Option<SelfIntersection>,
}

impl From<Classified> for CandidateReport {
    fn from(c: Classified) -> Self {
        let cand = c.candidate;
        CandidateReport {
            descriptor: cand.descriptor,
            durations: cand.policy.segments.iter().map(|s| s.dt).collect(),
            controls: cand.policy.segments.iter().map(|s| s.u).collect(),
            j: cand.j,
            t: cand.t,
            category: c.category,
            reaches_target: cand.reaches_target,
            diagnostics: cand.diagnostics,
            q_values: c.q_values,
            self_intersection: c.self_intersection,
        }
    }
}

#[derive(Serialize)]
pub struct SolveReport {
    pub format_version: u32,
    pub problem: ProblemEcho,
    pub bounds: SwitchingBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub candidates: Vec<CandidateReport>,
}

#[derive(Serialize)]
pub struct VersionedScan {
    pub format_version: u32,
    #[serde(flatten)]
    pub report: qoc_core::scan::ScanReport,
}

#[derive(Serialize)]
pub struct TrajectoryRow {
    pub tau: f64,
    pub u: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub switching: f64,
}
