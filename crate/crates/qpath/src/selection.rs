//! Model-size and fit diagnostics along a solution path.
//!
//! For problems built from a regression design, each path segment carries
//! an effective model size: the number of variables minus the number of
//! active constraints. Together with the residual sum of squares this
//! yields a prediction-error estimate of Mallows type at any penalty
//! level, which is the quantity to scan when using the path for model
//! selection.

use nalgebra::DVector;

use crate::path::{PathSegment, SolutionPath};
use crate::problem::QpProblem;

/// Errors from the diagnostics layer.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionError {
    /// The problem was not built from a design matrix, so residual and
    /// model-size reporting have nothing to work with.
    MissingProvenance,
    /// The noise variance must be strictly positive (or zero to reduce
    /// the score to pure residual error).
    NegativeVariance { value: f64 },
    /// The default variance estimate needs more observations than
    /// variables.
    TooFewObservations { n: usize, m: usize },
}

impl std::fmt::Display for SelectionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionError::MissingProvenance => {
                write!(f, "problem carries no design-matrix provenance")
            }
            SelectionError::NegativeVariance { value } => {
                write!(f, "noise variance must be nonnegative, got {value}")
            }
            SelectionError::TooFewObservations { n, m } => write!(
                f,
                "variance estimation needs n > m observations, got n = {n}, m = {m}"
            ),
        }
    }
}

impl std::error::Error for SelectionError {}

/// One diagnostic record at a penalty level.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub rho: f64,
    /// Weighted residual sum of squares at the path solution.
    pub rss: f64,
    /// Effective model size of the containing segment.
    pub df: usize,
    /// Prediction-error score `rss/n + 2 sigma2 df / n`.
    pub cp: f64,
}

/// A profile over penalty levels plus the variance it was scored with.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDiagnostics {
    pub points: Vec<ProfilePoint>,
    pub sigma2: f64,
}

/// Effective model size of a segment: variables minus active constraints.
/// Requires design provenance, since the count is meaningful as a model
/// size only for regression-backed problems.
pub fn degrees_of_freedom(
    problem: &QpProblem,
    segment: &PathSegment,
) -> Result<usize, SelectionError> {
    if problem.least_squares().is_none() {
        return Err(SelectionError::MissingProvenance);
    }
    Ok(segment.df)
}

/// Prediction-error score at a solution: `rss/n + 2 sigma2 df / n`, with
/// weighted residuals when the fit is weighted.
pub fn cp_statistic(
    problem: &QpProblem,
    x: &DVector<f64>,
    df: usize,
    sigma2: f64,
) -> Result<f64, SelectionError> {
    let ls = problem
        .least_squares()
        .ok_or(SelectionError::MissingProvenance)?;
    if sigma2 < 0.0 {
        return Err(SelectionError::NegativeVariance { value: sigma2 });
    }
    let n = ls.n() as f64;
    Ok(ls.rss(x) / n + 2.0 * sigma2 * df as f64 / n)
}

/// Default noise-variance estimate: residual mean square of the
/// unpenalized fit, `rss(x(0)) / (n - m)`.
pub fn estimate_sigma2(problem: &QpProblem, path: &SolutionPath) -> Result<f64, SelectionError> {
    let ls = problem
        .least_squares()
        .ok_or(SelectionError::MissingProvenance)?;
    let n = ls.n();
    let m = problem.num_vars();
    if n <= m {
        return Err(SelectionError::TooFewObservations { n, m });
    }
    let x0 = path.solution_at(0.0);
    Ok(ls.rss(&x0) / (n - m) as f64)
}

/// Residual sum of squares and model size at each requested level,
/// in the order given.
pub fn rss_profile(
    problem: &QpProblem,
    path: &SolutionPath,
    grid: &[f64],
) -> Result<Vec<(f64, f64, usize)>, SelectionError> {
    let ls = problem
        .least_squares()
        .ok_or(SelectionError::MissingProvenance)?;
    Ok(grid
        .iter()
        .map(|&rho| {
            let rho = rho.max(0.0);
            let x = path.solution_at(rho);
            (rho, ls.rss(&x), path.segment_at(rho).df)
        })
        .collect())
}

/// Scores the path at the union of the requested grid and every
/// breakpoint, sorted and deduplicated. `sigma2 = None` uses the
/// residual-mean-square default from [`estimate_sigma2`].
pub fn diagnostics(
    problem: &QpProblem,
    path: &SolutionPath,
    grid: &[f64],
    sigma2: Option<f64>,
) -> Result<PathDiagnostics, SelectionError> {
    let sigma2 = match sigma2 {
        Some(v) if v < 0.0 => return Err(SelectionError::NegativeVariance { value: v }),
        Some(v) => v,
        None => estimate_sigma2(problem, path)?,
    };
    let mut levels: Vec<f64> = grid
        .iter()
        .map(|&r| r.max(0.0))
        .chain(path.breakpoints())
        .collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let mut points = Vec::with_capacity(levels.len());
    for rho in levels {
        let x = path.solution_at(rho);
        let df = path.segment_at(rho).df;
        points.push(ProfilePoint {
            rho,
            rss: problem.least_squares().unwrap().rss(&x),
            df,
            cp: cp_statistic(problem, &x, df, sigma2)?,
        });
    }
    Ok(PathDiagnostics { points, sigma2 })
}
