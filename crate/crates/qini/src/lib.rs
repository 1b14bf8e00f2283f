//! Budget-constrained multi-armed treatment assignment: solution paths,
//! Qini curves, and bootstrap inference.
//!
//! Given per-unit estimates of treatment effects and cost contrasts for `K`
//! mutually exclusive treatment arms (plus a zero-cost control), this crate
//!
//! - computes the exact solution path of the fractional multiple-choice
//!   knapsack assignment problem over increasing budget ([`path`]),
//! - reduces each unit's arms to the upper-left convex hull that drives the
//!   allocation order ([`hull`]),
//! - forms IPW / cross-fit AIPW evaluation scores so policies can be valued
//!   without refitting models ([`scores`]),
//! - estimates Qini curves with half-sampling bootstrap standard errors and
//!   paired tests between targeting strategies, including a covariate-free
//!   baseline ([`inference`]),
//! - ships a synthetic three-armed design with closed-form effects for
//!   simulation studies ([`dgp`]), and
//! - exposes everything through a CSV-driven CLI ([`cli`]).
//!
//! Estimation of the effect function itself is out of scope: callers supply
//! effect estimates (fit on an independent training sample) and, for AIPW,
//! cross-fit nuisance estimates.

pub mod cli;
pub mod dgp;
mod error;
pub mod hull;
pub mod inference;
pub mod path;
pub mod scores;

pub use error::QiniError;
pub use hull::{compute_convex_hull, ArmPoint, HullArm, HullSequence};
pub use inference::{
    baseline_path, bootstrap_curve, difference_curve, normal_quantile, CurveEstimate,
    DifferenceEstimate, PolicySpec,
};
pub use path::{
    compute_path, threshold_policy, AllocationEntry, EvalFrame, PathEvent, PolicyAssignment,
    SolutionPath,
};
