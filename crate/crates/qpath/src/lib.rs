//! Exact penalty solution paths for strictly convex quadratic programs.
//!
//! The penalized objective `f(x) + rho * (sum |v_i'x - d_i| + sum (w_j'x - e_j)_+)`
//! has a minimizer `x(rho)` that is piecewise linear in the penalty level
//! `rho` and reaches the constrained minimizer of `f` at a finite level.
//! This crate computes the whole path by pivoting a symmetric tableau with
//! the sweep operator: one sweep when a constraint becomes active, one
//! inverse sweep when it leaves, with event times read directly off the
//! tableau between pivots.
//!
//! * [`sweep`] - the symmetric sweep kernel.
//! * [`problem`] - problem containers and the penalty objective.
//! * [`path`] - the path engine: segments, events, anomaly resolution.
//! * [`selection`] - degrees of freedom, Cp, and residual profiles.
//! * [`shape`] - constraint builders for shape-restricted regression.
//! * [`oracle`] - independent brute-force solvers used for verification.

#![forbid(unsafe_code)]
#![warn(clippy::all)]

pub mod oracle;
pub mod path;
pub mod problem;
pub mod selection;
pub mod shape;
pub mod sweep;

pub use path::{
    build_initial_tableau, solve_path, ActiveConstraint, Advance, AnomalyRecord, IndexSets,
    PathError, PathEvent, PathOptions, PathSegment, PathState, Region, SolutionPath,
};
pub use problem::{
    ConstraintKind, LeastSquaresData, ProblemError, QpProblem, SubgradientCoefficients,
};
pub use sweep::{full_sweep_inverse, SweepError, SymmetricTableau};
