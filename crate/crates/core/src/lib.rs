//! Quasi-Newton methods for smooth unconstrained multiobjective optimization.
//!
//! The central routine is [`solver::run`], which drives one of three variants:
//!
//! * [`Variant::GlobalBfgs`]: per-objective BFGS matrices updated with a
//!   corrected secant vector and a Wolfe line search. Globally convergent on
//!   nonconvex problems.
//! * [`Variant::BfgsWolfe`]: the classical per-objective update with a
//!   fallback curvature scalar, also with Wolfe steps.
//! * [`Variant::CautiousBfgsArmijo`]: updates skipped unless the curvature
//!   condition is comfortably satisfied, with Armijo backtracking.
//!
//! Each iteration solves `min_d max_j ∇F_j(x)ᵀd + ½dᵀB_jd` through its dual on
//! the unit simplex ([`subproblem`]). The [`metrics`] module has Purity,
//! Γ/Δ spread and performance profiles, and [`experiment`] runs seeded
//! benchmark sweeps and writes reproducible result bundles.

// `!(x > 0.0)` style guards reject NaN on purpose; dense kernels index by row.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod linesearch;
pub mod metrics;
pub mod numerics;
pub mod problem;
pub mod rng;
pub mod solver;
pub mod subproblem;
pub mod updates;

pub use error::{Error, Result};
pub use problem::{Evaluator, Jacobian, Problem, ProblemMeta};
pub use solver::{run, RChoice, RunResult, SolverConfig, Status, TraceLevel, Variant};
