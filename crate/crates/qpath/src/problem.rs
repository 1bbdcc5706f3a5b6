//! Strictly convex quadratic programs with affine equality and inequality
//! constraints, and their exact penalty objective.
//!
//! A problem holds `f(x) = x'Ax/2 + b'x + c` with constraints `Vx = d` and
//! `Wx <= e`. The penalized objective adds `rho` times the absolute
//! equality residuals and the positive parts of the inequality residuals.
//! Problems built from a regression design keep the design around so the
//! model-selection layer can compute residual sums of squares.

use nalgebra::{DMatrix, DVector};

use crate::sweep::{full_sweep_inverse, SweepError};

/// Errors raised while building or interrogating a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    /// Two inputs disagree about a dimension.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// The quadratic term is not symmetric.
    NotSymmetric { max_asymmetry: f64 },
    /// The quadratic term is not positive definite.
    NotPositiveDefinite { index: usize, value: f64 },
    /// The stacked constraint rows are linearly dependent.
    DependentConstraints { rank: usize, rows: usize },
    /// The design matrix does not have full column rank.
    RankDeficientDesign { rank: usize, cols: usize },
    /// A regression weight is zero or negative.
    NonpositiveWeight { index: usize, value: f64 },
    /// Supplied subgradient coefficients contradict the residual signs.
    InconsistentCoefficients { constraint: usize, value: f64 },
    /// Coefficient recovery needs a strictly positive penalty level.
    NonpositivePenalty { rho: f64 },
}

impl std::fmt::Display for ProblemError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemError::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            ProblemError::NotSymmetric { max_asymmetry } => {
                write!(f, "quadratic term is not symmetric: max asymmetry {max_asymmetry:e}")
            }
            ProblemError::NotPositiveDefinite { index, value } => write!(
                f,
                "quadratic term is not positive definite: pivot {value:e} at diagonal {index}"
            ),
            ProblemError::DependentConstraints { rank, rows } => write!(
                f,
                "constraint rows are linearly dependent: rank {rank} of {rows} rows"
            ),
            ProblemError::RankDeficientDesign { rank, cols } => write!(
                f,
                "design matrix is rank deficient: rank {rank} of {cols} columns"
            ),
            ProblemError::NonpositiveWeight { index, value } => {
                write!(f, "weight {index} is not positive: {value}")
            }
            ProblemError::InconsistentCoefficients { constraint, value } => write!(
                f,
                "subgradient coefficient for constraint {constraint} is inconsistent with its residual: {value}"
            ),
            ProblemError::NonpositivePenalty { rho } => {
                write!(f, "penalty level must be positive, got {rho}")
            }
        }
    }
}

impl std::error::Error for ProblemError {}

impl From<SweepError> for ProblemError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::NotPositiveDefinite { index, value }
            | SweepError::PivotTooSmall { index, value } => {
                ProblemError::NotPositiveDefinite { index, value }
            }
            SweepError::NotSymmetric { max_asymmetry } => {
                ProblemError::NotSymmetric { max_asymmetry }
            }
            SweepError::NotSquare { nrows, ncols } => ProblemError::DimensionMismatch {
                what: "quadratic term",
                expected: nrows,
                got: ncols,
            },
        }
    }
}

/// Which side of the constraint stack a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Equality,
    Inequality,
}

/// Regression data remembered by problems built from a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresData {
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    /// Per-observation weights; `None` means unit weights.
    pub weights: Option<DVector<f64>>,
}

impl LeastSquaresData {
    /// Number of observations.
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    /// Weighted residual sum of squares of a coefficient vector.
    pub fn rss(&self, x: &DVector<f64>) -> f64 {
        let r = &self.response - &self.design * x;
        match &self.weights {
            Some(w) => r.iter().zip(w.iter()).map(|(ri, wi)| wi * ri * ri).sum(),
            None => r.norm_squared(),
        }
    }
}

/// Subgradient coefficients of the penalty terms: one value per equality
/// row (in `[-1, 1]`) and one per inequality row (in `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientCoefficients {
    pub equality: DVector<f64>,
    pub inequality: DVector<f64>,
}

/// A strictly convex quadratic program with affine constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    v: DMatrix<f64>,
    d: DVector<f64>,
    w: DMatrix<f64>,
    e: DVector<f64>,
    least_squares: Option<LeastSquaresData>,
    dependent_rows_allowed: bool,
}

fn check_rows(
    what: &'static str,
    mat: &DMatrix<f64>,
    rhs: &DVector<f64>,
    m: usize,
) -> Result<(), ProblemError> {
    if mat.nrows() != rhs.len() {
        return Err(ProblemError::DimensionMismatch {
            what,
            expected: mat.nrows(),
            got: rhs.len(),
        });
    }
    if mat.nrows() > 0 && mat.ncols() != m {
        return Err(ProblemError::DimensionMismatch {
            what,
            expected: m,
            got: mat.ncols(),
        });
    }
    Ok(())
}

fn rank_with_tolerance(mat: &DMatrix<f64>) -> usize {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return 0;
    }
    let sv = mat.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

impl QpProblem {
    /// Builds a problem, verifying symmetry, positive definiteness, and
    /// linear independence of the stacked constraint rows.
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: f64,
        v: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
        e: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        Self::assemble(a, b, c, v, d, w, e, None, false)
    }

    /// Like [`QpProblem::new`] but accepts linearly dependent constraint
    /// rows, as arise from order constraints on grids. The path stays well
    /// posed because active sets are kept independent by pivoting; only
    /// whole-system coefficient recovery is unavailable.
    pub fn new_allowing_dependent_rows(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: f64,
        v: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
        e: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        Self::assemble(a, b, c, v, d, w, e, None, true)
    }

    /// Builds the quadratic form of a (weighted) least squares fit:
    /// `A = X'diag(w)X`, `b = -X'diag(w)y`, `c = y'diag(w)y / 2`, keeping
    /// the design for downstream residual computations.
    pub fn from_least_squares(
        design: DMatrix<f64>,
        response: DVector<f64>,
        weights: Option<DVector<f64>>,
        v: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
        e: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        Self::from_least_squares_impl(design, response, weights, v, d, w, e, false)
    }

    /// Least squares constructor that accepts dependent constraint rows;
    /// see [`QpProblem::new_allowing_dependent_rows`].
    pub fn from_least_squares_allowing_dependent_rows(
        design: DMatrix<f64>,
        response: DVector<f64>,
        weights: Option<DVector<f64>>,
        v: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
        e: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        Self::from_least_squares_impl(design, response, weights, v, d, w, e, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn from_least_squares_impl(
        design: DMatrix<f64>,
        response: DVector<f64>,
        weights: Option<DVector<f64>>,
        v: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
        e: DVector<f64>,
        allow_dependent: bool,
    ) -> Result<Self, ProblemError> {
        let n = design.nrows();
        let m = design.ncols();
        if response.len() != n {
            return Err(ProblemError::DimensionMismatch {
                what: "response",
                expected: n,
                got: response.len(),
            });
        }
        if let Some(wts) = &weights {
            if wts.len() != n {
                return Err(ProblemError::DimensionMismatch {
                    what: "weights",
                    expected: n,
                    got: wts.len(),
                });
            }
            for (i, &wi) in wts.iter().enumerate() {
                if wi.is_nan() || wi <= 0.0 {
                    return Err(ProblemError::NonpositiveWeight {
                        index: i,
                        value: wi,
                    });
                }
            }
        }
        let rank = rank_with_tolerance(&design);
        if rank < m {
            return Err(ProblemError::RankDeficientDesign { rank, cols: m });
        }
        let weighted = |mat: &DMatrix<f64>| -> DMatrix<f64> {
            match &weights {
                Some(wts) => {
                    let mut scaled = mat.clone();
                    for (i, mut row) in scaled.row_iter_mut().enumerate() {
                        row *= wts[i];
                    }
                    scaled
                }
                None => mat.clone(),
            }
        };
        let xtw = design.transpose() * weighted(&design);
        /* force exact symmetry: the triple product is symmetric only up to
        rounding */
        let a = (&xtw + xtw.transpose()) * 0.5;
        let wy = match &weights {
            Some(wts) => response.component_mul(wts),
            None => response.clone(),
        };
        let b = -(design.transpose() * &wy);
        let c = 0.5 * response.dot(&wy);
        let ls = LeastSquaresData {
            design,
            response,
            weights,
        };
        Self::assemble(a, b, c, v, d, w, e, Some(ls), allow_dependent)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: f64,
        v: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
        e: DVector<f64>,
        least_squares: Option<LeastSquaresData>,
        dependent_rows_allowed: bool,
    ) -> Result<Self, ProblemError> {
        let m = a.nrows();
        if a.ncols() != m {
            return Err(ProblemError::DimensionMismatch {
                what: "quadratic term",
                expected: m,
                got: a.ncols(),
            });
        }
        if b.len() != m {
            return Err(ProblemError::DimensionMismatch {
                what: "linear term",
                expected: m,
                got: b.len(),
            });
        }
        check_rows("equality constraints", &v, &d, m)?;
        check_rows("inequality constraints", &w, &e, m)?;
        /* positive definiteness is decided by whether a full sweep succeeds
        with all pivots positive */
        full_sweep_inverse(&a)?;
        let r = v.nrows();
        let s = w.nrows();
        if !dependent_rows_allowed && r + s > 0 {
            let mut u = DMatrix::zeros(r + s, m);
            u.rows_mut(0, r).copy_from(&v);
            u.rows_mut(r, s).copy_from(&w);
            let rank = rank_with_tolerance(&u);
            /* with more rows than variables full row independence is
            impossible; require the rows to span as much as they can */
            if rank < (r + s).min(m) {
                return Err(ProblemError::DependentConstraints { rank, rows: r + s });
            }
        }
        Ok(QpProblem {
            a,
            b,
            c,
            v,
            d,
            w,
            e,
            least_squares,
            dependent_rows_allowed,
        })
    }

    /// Number of variables.
    pub fn num_vars(&self) -> usize {
        self.a.nrows()
    }

    /// Number of equality constraints.
    pub fn num_eq(&self) -> usize {
        self.v.nrows()
    }

    /// Number of inequality constraints.
    pub fn num_ineq(&self) -> usize {
        self.w.nrows()
    }

    /// Total number of constraints.
    pub fn num_constraints(&self) -> usize {
        self.num_eq() + self.num_ineq()
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn equality_matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn equality_rhs(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn inequality_matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn inequality_rhs(&self) -> &DVector<f64> {
        &self.e
    }

    /// Regression data when the problem came from a design matrix.
    pub fn least_squares(&self) -> Option<&LeastSquaresData> {
        self.least_squares.as_ref()
    }

    /// Whether the constructor skipped the whole-stack independence check.
    pub fn dependent_rows_allowed(&self) -> bool {
        self.dependent_rows_allowed
    }

    /// Kind and within-kind index of global constraint `g`.
    pub fn constraint_kind(&self, g: usize) -> (ConstraintKind, usize) {
        let r = self.num_eq();
        if g < r {
            (ConstraintKind::Equality, g)
        } else {
            (ConstraintKind::Inequality, g - r)
        }
    }

    /// Row and right-hand side of global constraint `g`.
    pub fn constraint_row(&self, g: usize) -> (DVector<f64>, f64) {
        let (kind, i) = self.constraint_kind(g);
        match kind {
            ConstraintKind::Equality => (self.v.row(i).transpose(), self.d[i]),
            ConstraintKind::Inequality => (self.w.row(i).transpose(), self.e[i]),
        }
    }

    /// Residual of global constraint `g` at `x` (row dot x minus rhs).
    pub fn constraint_residual(&self, g: usize, x: &DVector<f64>) -> f64 {
        let (row, rhs) = self.constraint_row(g);
        row.dot(x) - rhs
    }

    /// All constraint rows stacked, equalities first.
    pub fn stacked_constraints(&self) -> DMatrix<f64> {
        let r = self.num_eq();
        let s = self.num_ineq();
        let mut u = DMatrix::zeros(r + s, self.num_vars());
        u.rows_mut(0, r).copy_from(&self.v);
        u.rows_mut(r, s).copy_from(&self.w);
        u
    }

    /// All right-hand sides stacked, equalities first.
    pub fn stacked_rhs(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_constraints());
        out.rows_mut(0, self.num_eq()).copy_from(&self.d);
        out.rows_mut(self.num_eq(), self.num_ineq())
            .copy_from(&self.e);
        out
    }

    /// The smooth objective `x'Ax/2 + b'x + c`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    /// The exact penalty objective at level `rho`: the smooth objective
    /// plus `rho` times the absolute equality residuals and the positive
    /// parts of the inequality residuals.
    pub fn penalized_objective(&self, x: &DVector<f64>, rho: f64) -> f64 {
        let mut penalty = 0.0;
        for i in 0..self.num_eq() {
            penalty += (self.v.row(i).transpose().dot(x) - self.d[i]).abs();
        }
        for j in 0..self.num_ineq() {
            penalty += (self.w.row(j).transpose().dot(x) - self.e[j]).max(0.0);
        }
        self.objective(x) + rho * penalty
    }

    /// Gradient-with-subgradients of the penalized objective:
    /// `Ax + b + rho (V's + W't)`.
    ///
    /// The coefficients are first checked against the residual signs at
    /// `x`: a strictly negative equality residual forces `s = -1`, a
    /// strictly positive one forces `s = +1`, and on the zero residual any
    /// value in `[-1, 1]` is admissible (and `[0, 1]`, with `0`/`1` forced
    /// off the boundary, for inequalities). `tol` separates "strict" from
    /// "zero" and also bounds the allowed coefficient slack.
    pub fn stationarity_residual(
        &self,
        x: &DVector<f64>,
        rho: f64,
        coeffs: &SubgradientCoefficients,
        tol: f64,
    ) -> Result<DVector<f64>, ProblemError> {
        if coeffs.equality.len() != self.num_eq() {
            return Err(ProblemError::DimensionMismatch {
                what: "equality coefficients",
                expected: self.num_eq(),
                got: coeffs.equality.len(),
            });
        }
        if coeffs.inequality.len() != self.num_ineq() {
            return Err(ProblemError::DimensionMismatch {
                what: "inequality coefficients",
                expected: self.num_ineq(),
                got: coeffs.inequality.len(),
            });
        }
        for i in 0..self.num_eq() {
            let res = self.v.row(i).transpose().dot(x) - self.d[i];
            let s = coeffs.equality[i];
            let ok = if res < -tol {
                (s + 1.0).abs() <= tol
            } else if res > tol {
                (s - 1.0).abs() <= tol
            } else {
                (-1.0 - tol..=1.0 + tol).contains(&s)
            };
            if !ok {
                return Err(ProblemError::InconsistentCoefficients {
                    constraint: i,
                    value: s,
                });
            }
        }
        for j in 0..self.num_ineq() {
            let res = self.w.row(j).transpose().dot(x) - self.e[j];
            let t = coeffs.inequality[j];
            let ok = if res < -tol {
                t.abs() <= tol
            } else if res > tol {
                (t - 1.0).abs() <= tol
            } else {
                (-tol..=1.0 + tol).contains(&t)
            };
            if !ok {
                return Err(ProblemError::InconsistentCoefficients {
                    constraint: self.num_eq() + j,
                    value: t,
                });
            }
        }
        let mut grad = &self.a * x + &self.b;
        if self.num_eq() > 0 {
            grad += self.v.transpose() * &coeffs.equality * rho;
        }
        if self.num_ineq() > 0 {
            grad += self.w.transpose() * &coeffs.inequality * rho;
        }
        Ok(grad)
    }

    /// Recovers subgradient coefficients from a stationary point by
    /// projecting the smooth gradient onto the constraint rows:
    /// the stacked coefficients scaled by `rho` solve
    /// `U U' z = -U (Ax + b)`.
    ///
    /// Needs `rho > 0` and independent constraint rows.
    pub fn recover_coefficients(
        &self,
        x: &DVector<f64>,
        rho: f64,
    ) -> Result<SubgradientCoefficients, ProblemError> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(ProblemError::NonpositivePenalty { rho });
        }
        let u = self.stacked_constraints();
        let total = self.num_constraints();
        if total == 0 {
            return Ok(SubgradientCoefficients {
                equality: DVector::zeros(0),
                inequality: DVector::zeros(0),
            });
        }
        let gram = &u * u.transpose();
        let rhs = -(&u * (&self.a * x + &self.b));
        let scaled = gram
            .lu()
            .solve(&rhs)
            .ok_or(ProblemError::DependentConstraints {
                rank: rank_with_tolerance(&u),
                rows: total,
            })?;
        let z = scaled / rho;
        Ok(SubgradientCoefficients {
            equality: z.rows(0, self.num_eq()).into_owned(),
            inequality: z.rows(self.num_eq(), self.num_ineq()).into_owned(),
        })
    }
}
