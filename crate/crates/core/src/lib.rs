//! Monte Carlo estimation of relative volumes of naturally restricted
//! subsets of the bipartite nonsignaling polytope.
//!
//! The pipeline is: draw points uniformly from the nonsignaling polytope in
//! Collins–Gisin coordinates ([`polytope`]), decide membership of each point
//! in a target set through its white-noise visibility ([`membership`], backed
//! by [`local`] for the Bell-local polytope and [`hierarchy`] + [`solver`] for
//! the semidefinite relaxations), then reduce the verdict stream to relative
//! volumes and visibility statistics ([`volume`]).

pub mod error;
pub mod hierarchy;
pub mod local;
pub mod membership;
pub mod polytope;
pub mod scenario;
pub mod solver;
pub mod volume;

pub use error::{Error, Result};
pub use hierarchy::{compile, HierarchyKind, Level, MomentProblem};
pub use local::{enumerate_vertices, visibility_to_local, VertexTable};
pub use membership::{MembershipVerdict, TargetKind, TargetSet, Tester, VerdictStatus};
pub use polytope::{ns_polytope, sample_uniform, PolytopeH, SamplerConfig};
pub use scenario::{BellScenario, Correlation, FullDistribution};
pub use solver::{solve, ConicProgram, SolveReport, SolveStatus, SolverSettings};
pub use volume::{RvEstimate, VisibilityStats};

/// Membership tolerance: a point is inside a target when `v* >= 1 - MEMBERSHIP_EPS`.
pub const MEMBERSHIP_EPS: f64 = 1e-6;

/// Upper bound on the visibility variable; keeps the program bounded at white noise.
pub const VISIBILITY_CAP: f64 = 10.0;
