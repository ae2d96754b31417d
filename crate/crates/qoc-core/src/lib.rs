//! Optimal control of the constrained two-level Landau-Zener system.
//!
//! The state is a Bloch vector r driven by dr/dtau = 2 h x r with
//! h = (1, 0, u) and |u| <= u_max.  The library synthesizes Pontryagin
//! extremals (bang-bang type I, bang-singular type II), verifies first and
//! second order optimality conditions, classifies candidate solutions into
//! optima and the trap taxonomy (deadlock, loop, topological, perfect loop,
//! saddle), and cross-checks against a direct numerical oracle.

pub mod bloch;
pub mod classify;
pub mod num;
pub mod oracle;
pub mod pmp;
pub mod scan;
pub mod synthesis;
pub mod variation;

pub use bloch::{ControlPolicy, ControlProblem, Mode, Segment, Vec3};
