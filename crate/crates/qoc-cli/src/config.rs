//! Problem configuration and policy file formats (JSON).

use qoc_core::{ControlPolicy, ControlProblem, Mode, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub u_max: f64,
    pub r0: [f64; 3],
    pub o: [f64; 3],
    /// "time-optimal" or "fixed-t".
    pub mode: String,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_starts: Option<usize>,
}

fn default_version() -> u32 {
    1
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_problem(&self) -> Result<ControlProblem, String> {
        let r0 = Vec3::new(self.r0[0], self.r0[1], self.r0[2]);
        let o = Vec3::new(self.o[0], self.o[1], self.o[2]);
        if r0.norm() < 1e-12 || o.norm() < 1e-12 {
            return Err("r0 and o must be nonzero vectors".into());
        }
        if !(self.u_max > 0.0) {
            return Err("u_max must be positive".into());
        }
        let mode = match self.mode.as_str() {
            "time-optimal" => Mode::TimeOptimal,
            "fixed-t" => {
                let t = self.t.ok_or("fixed-t mode requires a T field")?;
                if !(t >= 0.0) {
                    return Err("T must be nonnegative".into());
                }
                Mode::FixedT(t)
            }
            other => return Err(format!("unknown mode '{other}'")),
        };
        Ok(ControlProblem::new(r0, o, self.u_max, mode))
    }
}

/// On-disk policy: a list of (u, dt) segments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub u: f64,
    pub dt: f64,
}

pub fn load_policy(path: &Path) -> Result<ControlPolicy, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file: PolicyFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    for s in &file.segments {
        if !(s.dt >= 0.0) {
            return Err("segment durations must be nonnegative".into());
        }
    }
    Ok(ControlPolicy {
        segments: file
            .segments
            .into_iter()
            .map(|s| qoc_core::Segment { u: s.u, dt: s.dt })
            .collect(),
    })
}

fn config(u_max: f64, r0: [f64; 3], o: [f64; 3], mode: &str, t: Option<f64>) -> ProblemConfig {
    ProblemConfig {
        format_version: 1,
        u_max,
        r0,
        o,
        mode: mode.into(),
        t,
        seed: 0,
        n_max: None,
        oracle_restarts: None,
        oracle_resolution: None,
        scan_starts: None,
    }
}

/// Built-in problems from the published figures.
pub fn demo_problem(name: &str) -> Option<(ControlProblem, ProblemConfig)> {
    let cfg = match name {
        "fig9" => config(0.25, [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], "time-optimal", None),
        "fig10" => {
            config(8.0, [0.5, 0.5, 8.0], [1.0, 0.0, 8.0], "fixed-t", Some(0.312429))
        }
        "fig2a" => config(0.5, [0.0, 1.0, -0.5], [0.0, 1.0, 1.0], "time-optimal", None),
        "fig11" => config(1.0, [1.0, 1.0, -1.0], [-1.0, 1.0, 1.0], "time-optimal", None),
        _ => return None,
    };
    let problem = cfg.to_problem().ok()?;
    Some((problem, cfg))
}
