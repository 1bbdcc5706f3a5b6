//! Constraint-matrix builders for shape-restricted regression.
//!
//! Each builder returns an inequality pair `(W, e)` meaning `W x <= e`,
//! ready to drop into a [`QpProblem`]. Order constraints (isotone,
//! antitone, grid partial orders) use difference rows; curvature
//! constraints (concave, convex) use second-difference rows scaled by the
//! product of the adjacent spacings, which keeps coefficients well sized
//! on fine grids and leaves the constraint set unchanged.

use nalgebra::{DMatrix, DVector};

use crate::problem::{ProblemError, QpProblem};

/// Errors from shape-constraint construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeError {
    /// Curvature constraints need strictly increasing abscissae.
    NonIncreasingAbscissae { index: usize },
    /// A regression weight is zero or negative.
    NonpositiveWeight { index: usize, value: f64 },
    /// The spec asks for a constraint family that needs auxiliary data
    /// (knots or a grid shape) that is missing or sized wrong.
    MissingShapeData { needed: &'static str },
    /// Auxiliary data disagrees with the variable count.
    ShapeSizeMismatch { expected: usize, got: usize },
    /// Building the quadratic program itself failed.
    Problem(ProblemError),
}

impl std::fmt::Display for ShapeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShapeError::NonIncreasingAbscissae { index } => {
                write!(
                    f,
                    "abscissae must be strictly increasing at position {index}"
                )
            }
            ShapeError::NonpositiveWeight { index, value } => {
                write!(f, "weight {index} is not positive: {value}")
            }
            ShapeError::MissingShapeData { needed } => {
                write!(f, "shape specification is missing {needed}")
            }
            ShapeError::ShapeSizeMismatch { expected, got } => write!(
                f,
                "shape data size mismatch: expected {expected} variables, got {got}"
            ),
            ShapeError::Problem(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ShapeError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ShapeError::Problem(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ProblemError> for ShapeError {
    fn from(e: ProblemError) -> Self {
        ShapeError::Problem(e)
    }
}

/// The constraint families the builders cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    /// `x_1 <= x_2 <= ... <= x_m`.
    Isotone,
    /// `x_1 >= x_2 >= ... >= x_m`.
    Antitone,
    /// Difference quotients nonincreasing over the knots.
    Concave,
    /// Difference quotients nondecreasing over the knots.
    Convex,
    /// `x_i >= 0` for all coordinates.
    Nonnegative,
    /// Componentwise order over a grid: each entry at most its right and
    /// down neighbors, optional nonnegative corner.
    MatrixPartialOrder,
    /// All coordinates nonnegative and their sum bounded above.
    BoundSum,
}

/// A declarative constraint request: the family plus whatever auxiliary
/// data it needs (knots for curvature, a grid shape for partial orders).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Strictly increasing abscissae; required by curvature kinds.
    pub knots: Option<Vec<f64>>,
    /// `(rows, cols)` of the grid; required by the partial-order kind.
    pub grid_shape: Option<(usize, usize)>,
    /// Whether the partial-order family pins the top-left entry at or
    /// above zero.
    pub nonneg_corner: bool,
    /// Upper bound on the coordinate sum for the bound-sum family.
    pub sum_bound: f64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind) -> Self {
        ShapeSpec {
            kind,
            knots: None,
            grid_shape: None,
            nonneg_corner: true,
            sum_bound: 1.0,
        }
    }

    pub fn with_knots(mut self, knots: Vec<f64>) -> Self {
        self.knots = Some(knots);
        self
    }

    pub fn with_grid(mut self, rows: usize, cols: usize) -> Self {
        self.grid_shape = Some((rows, cols));
        self
    }

    /// Whether this family produces linearly dependent rows by nature
    /// (grid orders contain cycles once the grid is two-dimensional).
    pub fn allows_dependent_rows(&self) -> bool {
        matches!(self.kind, ShapeKind::MatrixPartialOrder)
    }

    /// Builds the inequality pair for `m` variables.
    pub fn build(&self, m: usize) -> Result<(DMatrix<f64>, DVector<f64>), ShapeError> {
        match self.kind {
            ShapeKind::Isotone => Ok(isotone_constraints(m)),
            ShapeKind::Antitone => Ok(antitone_constraints(m)),
            ShapeKind::Concave | ShapeKind::Convex => {
                let knots = self
                    .knots
                    .as_deref()
                    .ok_or(ShapeError::MissingShapeData { needed: "knots" })?;
                if knots.len() != m {
                    return Err(ShapeError::ShapeSizeMismatch {
                        expected: m,
                        got: knots.len(),
                    });
                }
                if self.kind == ShapeKind::Concave {
                    concavity_constraints(knots)
                } else {
                    convexity_constraints(knots)
                }
            }
            ShapeKind::Nonnegative => Ok(nonnegativity_constraints(m)),
            ShapeKind::MatrixPartialOrder => {
                let (rows, cols) = self.grid_shape.ok_or(ShapeError::MissingShapeData {
                    needed: "grid_shape",
                })?;
                if rows * cols != m {
                    return Err(ShapeError::ShapeSizeMismatch {
                        expected: m,
                        got: rows * cols,
                    });
                }
                Ok(matrix_partial_order(rows, cols, self.nonneg_corner))
            }
            ShapeKind::BoundSum => Ok(bound_sum_constraints(m, self.sum_bound)),
        }
    }
}

/// Rows `x_i - x_{i+1} <= 0` for `i = 1..m-1`; no rows when `m < 2`.
pub fn isotone_constraints(m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = m.saturating_sub(1);
    let mut w = DMatrix::zeros(rows, m);
    for i in 0..rows {
        w[(i, i)] = 1.0;
        w[(i, i + 1)] = -1.0;
    }
    (w, DVector::zeros(rows))
}

/// Rows `x_{i+1} - x_i <= 0`: the exact negation of the isotone rows.
pub fn antitone_constraints(m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (w, e) = isotone_constraints(m);
    (-w, e)
}

/// One row per interior knot demanding a nonincreasing difference
/// quotient, scaled by the product of the adjacent spacings: with
/// `h_k = x_k - x_{k-1}` the row reads
/// `h_{k+1} x_{k-1} - (h_k + h_{k+1}) x_k + h_k x_{k+1} <= 0`.
pub fn concavity_constraints(knots: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>), ShapeError> {
    for (i, pair) in knots.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(ShapeError::NonIncreasingAbscissae { index: i + 1 });
        }
    }
    let m = knots.len();
    let rows = m.saturating_sub(2);
    let mut w = DMatrix::zeros(rows, m);
    for k in 1..m.max(1) - 1 {
        let h_lo = knots[k] - knots[k - 1];
        let h_hi = knots[k + 1] - knots[k];
        w[(k - 1, k - 1)] = h_hi;
        w[(k - 1, k)] = -(h_lo + h_hi);
        w[(k - 1, k + 1)] = h_lo;
    }
    Ok((w, DVector::zeros(rows)))
}

/// The negation of [`concavity_constraints`]: difference quotients
/// nondecreasing.
pub fn convexity_constraints(knots: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>), ShapeError> {
    let (w, e) = concavity_constraints(knots)?;
    Ok((-w, e))
}

/// Rows `-x_i <= 0` for every coordinate.
pub fn nonnegativity_constraints(m: usize) -> (DMatrix<f64>, DVector<f64>) {
    (-DMatrix::identity(m, m), DVector::zeros(m))
}

/// Componentwise-order rows over a row-major vectorized `rows x cols`
/// grid: first `x[i,j] <= x[i,j+1]` scanning cells row by row, then
/// `x[i,j] <= x[i+1,j]` likewise, then the optional `x[0,0] >= 0` row.
/// Grids with both dimensions above one contain cycles, so the rows are
/// linearly dependent by nature; pair with the dependent-row-tolerant
/// problem constructors.
pub fn matrix_partial_order(
    rows: usize,
    cols: usize,
    nonneg_corner: bool,
) -> (DMatrix<f64>, DVector<f64>) {
    let m = rows * cols;
    let n_rows =
        rows * cols.saturating_sub(1) + rows.saturating_sub(1) * cols + usize::from(nonneg_corner);
    let mut w = DMatrix::zeros(n_rows, m);
    let idx = |i: usize, j: usize| i * cols + j;
    let mut row = 0;
    for i in 0..rows {
        for j in 0..cols.saturating_sub(1) {
            w[(row, idx(i, j))] = 1.0;
            w[(row, idx(i, j + 1))] = -1.0;
            row += 1;
        }
    }
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols {
            w[(row, idx(i, j))] = 1.0;
            w[(row, idx(i + 1, j))] = -1.0;
            row += 1;
        }
    }
    if nonneg_corner {
        w[(row, 0)] = -1.0;
    }
    (w, DVector::zeros(n_rows))
}

/// Nonnegativity of every coordinate plus `sum x_i <= bound`.
pub fn bound_sum_constraints(m: usize, bound: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut w = DMatrix::zeros(m + 1, m);
    for i in 0..m {
        w[(i, i)] = -1.0;
    }
    for j in 0..m {
        w[(m, j)] = 1.0;
    }
    let mut e = DVector::zeros(m + 1);
    e[m] = bound;
    (w, e)
}

/// Builds the weighted mean-fit problem: identity design, `A = diag(w)`,
/// `b = -diag(w) y`, with the requested shape constraints attached and
/// the design kept for downstream residual and model-size reporting.
pub fn weighted_mean_fit_problem(
    y: &DVector<f64>,
    weights: &DVector<f64>,
    spec: &ShapeSpec,
) -> Result<QpProblem, ShapeError> {
    let n = y.len();
    for (i, &w) in weights.iter().enumerate() {
        if w.is_nan() || w <= 0.0 {
            return Err(ShapeError::NonpositiveWeight { index: i, value: w });
        }
    }
    let (w, e) = spec.build(n)?;
    let design = DMatrix::identity(n, n);
    let v = DMatrix::zeros(0, n);
    let d = DVector::zeros(0);
    let problem = if spec.allows_dependent_rows() {
        QpProblem::from_least_squares_allowing_dependent_rows(
            design,
            y.clone(),
            Some(weights.clone()),
            v,
            d,
            w,
            e,
        )?
    } else {
        QpProblem::from_least_squares(design, y.clone(), Some(weights.clone()), v, d, w, e)?
    };
    Ok(problem)
}
