//! Symmetric sweep operator on a packed triangular tableau.
//!
//! Sweeping diagonal `k` exchanges the roles of the `k`-th variable between
//! the two sides of a symmetric linear system. A complete sweep of a
//! positive definite matrix yields its negated inverse, and partial sweeps
//! produce the projected-inverse blocks the path engine reads its segment
//! data from. Every sweep is undone exactly by the matching inverse sweep
//! on the same index.

use nalgebra::DMatrix;

/// Errors raised by tableau construction and pivoting.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepError {
    /// The pivot magnitude at `index` fell below the tableau's tolerance.
    PivotTooSmall { index: usize, value: f64 },
    /// A diagonal entry failed the positivity test while inverting a
    /// matrix that was claimed positive definite.
    NotPositiveDefinite { index: usize, value: f64 },
    /// The input matrix is not symmetric within tolerance.
    NotSymmetric { max_asymmetry: f64 },
    /// The input matrix is not square.
    NotSquare { nrows: usize, ncols: usize },
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepError::PivotTooSmall { index, value } => {
                write!(f, "pivot at diagonal {index} too small: {value:e}")
            }
            SweepError::NotPositiveDefinite { index, value } => {
                write!(
                    f,
                    "matrix is not positive definite: pivot {value:e} at diagonal {index}"
                )
            }
            SweepError::NotSymmetric { max_asymmetry } => {
                write!(
                    f,
                    "matrix is not symmetric: max asymmetry {max_asymmetry:e}"
                )
            }
            SweepError::NotSquare { nrows, ncols } => {
                write!(f, "matrix is not square: {nrows}x{ncols}")
            }
        }
    }
}

impl std::error::Error for SweepError {}

/// Default relative factor for the pivot tolerance.
///
/// The effective tolerance is this factor times `max(1, s)` where `s` is
/// the largest diagonal magnitude at construction time.
pub const DEFAULT_PIVOT_TOL_FACTOR: f64 = 1e-12;

/// Symmetric matrix stored as one packed lower triangle, with per-diagonal
/// sweep bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTableau {
    dim: usize,
    /* row-major lower triangle: (i, j) with j <= i lives at i*(i+1)/2 + j */
    tri: Vec<f64>,
    swept: Vec<bool>,
    pivot_tol: f64,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

impl SymmetricTableau {
    /// An all-zero tableau of the given dimension, no diagonals swept.
    pub fn zeros(dim: usize) -> Self {
        SymmetricTableau {
            dim,
            tri: vec![0.0; dim * (dim + 1) / 2],
            swept: vec![false; dim],
            pivot_tol: DEFAULT_PIVOT_TOL_FACTOR,
        }
    }

    /// Builds a tableau from a symmetric matrix.
    ///
    /// The matrix must be square and symmetric within `1e-12 * max(1, scale)`
    /// where `scale` is its largest entry magnitude; only the lower triangle
    /// is stored.
    pub fn from_matrix(mat: &DMatrix<f64>) -> Result<Self, SweepError> {
        if mat.nrows() != mat.ncols() {
            return Err(SweepError::NotSquare {
                nrows: mat.nrows(),
                ncols: mat.ncols(),
            });
        }
        let dim = mat.nrows();
        let scale = mat.amax().max(1.0);
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in 0..i {
                max_asym = max_asym.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
        if max_asym > 1e-12 * scale {
            return Err(SweepError::NotSymmetric {
                max_asymmetry: max_asym,
            });
        }
        let mut tab = SymmetricTableau::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                tab.tri[tri_index(i, j)] = mat[(i, j)];
            }
        }
        tab.reset_pivot_tolerance();
        Ok(tab)
    }

    /// Recomputes the pivot tolerance from the current diagonal scale.
    ///
    /// Called once after the tableau is filled; later sweeps keep the
    /// tolerance fixed so that it reflects the starting scale.
    pub fn reset_pivot_tolerance(&mut self) {
        let scale = (0..self.dim)
            .map(|k| self.get(k, k).abs())
            .fold(0.0f64, f64::max);
        self.pivot_tol = DEFAULT_PIVOT_TOL_FACTOR * scale.max(1.0);
    }

    /// Overrides the pivot tolerance factor, rescaled by the current
    /// diagonal magnitude exactly as the default is.
    pub fn set_pivot_tolerance_factor(&mut self, factor: f64) {
        let scale = (0..self.dim)
            .map(|k| self.get(k, k).abs())
            .fold(0.0f64, f64::max);
        self.pivot_tol = factor * scale.max(1.0);
    }

    /// The effective absolute pivot tolerance.
    pub fn pivot_tolerance(&self) -> f64 {
        self.pivot_tol
    }

    /// Dimension of the tableau.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)`; symmetry makes argument order irrelevant.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.tri[tri_index(i, j)]
        } else {
            self.tri[tri_index(j, i)]
        }
    }

    /// Sets entry `(i, j)` (and by symmetry `(j, i)`).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if j <= i {
            self.tri[tri_index(i, j)] = value;
        } else {
            self.tri[tri_index(j, i)] = value;
        }
    }

    /// Whether diagonal `k` has been swept an odd number of times.
    pub fn is_swept(&self, k: usize) -> bool {
        self.swept[k]
    }

    /// Indices currently swept.
    pub fn swept_indices(&self) -> Vec<usize> {
        (0..self.dim).filter(|&k| self.swept[k]).collect()
    }

    /// Materializes the full symmetric matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// Sweeps diagonal `k`.
    pub fn sweep(&mut self, k: usize) -> Result<(), SweepError> {
        self.pivot(k, false)
    }

    /// Inverse-sweeps diagonal `k`, undoing a prior sweep of the same index.
    pub fn inverse_sweep(&mut self, k: usize) -> Result<(), SweepError> {
        self.pivot(k, true)
    }

    /* index loops here mirror the triangular storage; iterator forms would
    hide the i >= j bound */
    #[allow(clippy::needless_range_loop)]
    fn pivot(&mut self, k: usize, inverse: bool) -> Result<(), SweepError> {
        assert!(k < self.dim, "pivot index {k} out of range {}", self.dim);
        let d = self.get(k, k);
        if d.abs() <= self.pivot_tol {
            return Err(SweepError::PivotTooSmall { index: k, value: d });
        }
        /* snapshot column k before touching anything: the rank-one update
        must use pre-pivot values throughout */
        let col: Vec<f64> = (0..self.dim).map(|i| self.get(i, k)).collect();
        for i in 0..self.dim {
            if i == k {
                continue;
            }
            let ci = col[i];
            if ci == 0.0 {
                continue;
            }
            for j in 0..=i {
                if j == k {
                    continue;
                }
                self.tri[tri_index(i, j)] -= ci * col[j] / d;
            }
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        for i in 0..self.dim {
            if i != k {
                self.set(i, k, sign * col[i] / d);
            }
        }
        self.set(k, k, -1.0 / d);
        self.swept[k] = !self.swept[k];
        #[cfg(debug_assertions)]
        {
            debug_assert!(
                self.tri.iter().all(|v| v.is_finite()),
                "non-finite tableau entry after pivot at {k}"
            );
        }
        Ok(())
    }
}

/// Inverts a symmetric positive definite matrix by sweeping every diagonal.
///
/// Fails with [`SweepError::NotPositiveDefinite`] if any diagonal entry is
/// not strictly positive at the moment it is swept, which is an exact
/// characterization of positive definiteness up to the pivot tolerance.
pub fn full_sweep_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, SweepError> {
    let mut tab = SymmetricTableau::from_matrix(a)?;
    for k in 0..tab.dim() {
        let d = tab.get(k, k);
        if d <= tab.pivot_tolerance() {
            return Err(SweepError::NotPositiveDefinite { index: k, value: d });
        }
        tab.sweep(k)?;
    }
    /* a full sweep leaves the negated inverse */
    Ok(-tab.to_matrix())
}
