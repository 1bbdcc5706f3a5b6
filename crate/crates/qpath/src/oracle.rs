//! Brute-force reference solvers used to cross-check the path engine.
//!
//! Nothing here shares code with the sweep-based engine, which is the point:
//! the constrained solver enumerates candidate active sets outright, the
//! penalized minimizer runs direction-set descent with exact piecewise
//! quadratic line searches, and the isotone fitter is a direct pooling pass.
//! All three are deliberately slow and transparent.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::problem::QpProblem;

/// Failure modes of the reference solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    /// No inequality subset yields a feasible stationary point with
    /// admissible multipliers: the constraint set is empty.
    Infeasible,
    /// The direction-set minimizer hit its sweep cap before the objective
    /// stabilized.
    NonConvergence { sweeps: usize },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Infeasible => {
                write!(f, "no feasible point satisfies every constraint")
            }
            OracleError::NonConvergence { sweeps } => {
                write!(
                    f,
                    "objective failed to stabilize within {sweeps} direction sweeps"
                )
            }
        }
    }
}

impl std::error::Error for OracleError {}

/// A constrained minimizer found by exhaustive active-set enumeration.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// The minimizer.
    pub x: DVector<f64>,
    /// Global indices of the rows enforced with equality at `x`:
    /// every equality row, plus the inequality rows held on their boundary.
    pub active_set: Vec<usize>,
    /// Lagrange multipliers aligned with `active_set`. Inequality entries
    /// are nonnegative up to `-1e-10`.
    pub multipliers: DVector<f64>,
    /// Smooth objective value at `x`.
    pub objective: f64,
}

/* Stationary-system residuals are accepted up to 1e-9 times the data scale;
 * inequality multipliers may dip to -1e-10 before a candidate is rejected. */
const KKT_RESIDUAL_FACTOR: f64 = 1e-9;
const MULTIPLIER_FLOOR: f64 = -1e-10;
const FEASIBILITY_FACTOR: f64 = 1e-8;

/// Minimize the smooth objective subject to every constraint by trying all
/// `2^s` subsets of inequality rows as candidate boundaries.
///
/// For each subset the equality-constrained stationary system is solved
/// directly; a candidate is kept when it is feasible, its boundary rows
/// carry nonnegative multipliers, and its stationarity residual is small.
/// The kept candidate with the smallest objective is returned. Intended for
/// verification only: cost is exponential in the number of inequalities.
pub fn solve_constrained_enumeration(p: &QpProblem) -> Result<OracleSolution, OracleError> {
    let m = p.num_vars();
    let r = p.num_eq();
    let s = p.num_ineq();
    assert!(
        r + s <= 20,
        "enumeration over {} constraint rows is intractable",
        r + s
    );

    let rhs_scale = 1.0
        + if r + s > 0 {
            p.stacked_rhs().amax()
        } else {
            0.0
        };
    let kkt_scale = 1.0 + p.linear().amax() + rhs_scale;
    let feas_tol = FEASIBILITY_FACTOR * rhs_scale;
    let kkt_tol = KKT_RESIDUAL_FACTOR * kkt_scale;

    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1u32 << s) {
        let chosen: Vec<usize> = (0..s).filter(|j| mask & (1 << j) != 0).collect();
        let k = r + chosen.len();
        if k > m {
            /* more boundary rows than variables can never be independent */
            continue;
        }

        let mut kkt = DMatrix::<f64>::zeros(m + k, m + k);
        kkt.view_mut((0, 0), (m, m)).copy_from(p.quadratic());
        let mut rhs = DVector::<f64>::zeros(m + k);
        rhs.rows_mut(0, m).copy_from(&(-p.linear()));
        for (row, i) in (0..r).enumerate() {
            for col in 0..m {
                kkt[(m + row, col)] = p.equality_matrix()[(i, col)];
                kkt[(col, m + row)] = p.equality_matrix()[(i, col)];
            }
            rhs[m + row] = p.equality_rhs()[i];
        }
        for (offset, &j) in chosen.iter().enumerate() {
            let row = r + offset;
            for col in 0..m {
                kkt[(m + row, col)] = p.inequality_matrix()[(j, col)];
                kkt[(col, m + row)] = p.inequality_matrix()[(j, col)];
            }
            rhs[m + row] = p.inequality_rhs()[j];
        }

        let lu = kkt.clone().lu();
        let Some(z) = lu.solve(&rhs) else { continue };
        if (&kkt * &z - &rhs).amax() > kkt_tol {
            continue;
        }

        let x = z.rows(0, m).into_owned();
        let lambda = z.rows(m, k).into_owned();
        if (r..k).any(|row| lambda[row] < MULTIPLIER_FLOOR) {
            continue;
        }
        let feasible = (0..r).all(|i| p.constraint_residual(i, &x).abs() <= feas_tol)
            && (0..s).all(|j| p.constraint_residual(r + j, &x) <= feas_tol);
        if !feasible {
            continue;
        }

        let objective = p.objective(&x);
        let replace = match &best {
            None => true,
            /* a strictly lower objective wins; ties keep the earlier
             * (smaller) boundary set found by the ascending mask order */
            Some(cur) => objective < cur.objective - 1e-12 * (1.0 + cur.objective.abs()),
        };
        if replace {
            let active_set = (0..r).chain(chosen.iter().map(|&j| r + j)).collect();
            best = Some(OracleSolution {
                x,
                active_set,
                multipliers: lambda,
                objective,
            });
        }
    }
    best.ok_or(OracleError::Infeasible)
}

const MAX_SWEEPS: usize = 500;
const STALL_SWEEPS: usize = 3;

/// Minimize the penalized objective at a fixed level `rho` by cyclic exact
/// line searches from `x0`.
///
/// The direction set is the coordinate axes, every constraint row, a pair
/// of fresh random directions per sweep (seeded deterministically), and a
/// basis tangent to whichever constraint rows currently hold with equality;
/// the tangents let the search slide along a penalty kink instead of
/// stalling on it. Along any direction the objective is a convex piecewise
/// quadratic, so each line search is solved exactly from its breakpoints
/// rather than by bracketing. Converges when several consecutive sweeps
/// leave the objective unchanged to relative 1e-12.
pub fn minimize_penalized_grid(
    p: &QpProblem,
    rho: f64,
    x0: &DVector<f64>,
) -> Result<DVector<f64>, OracleError> {
    assert!(rho >= 0.0, "penalty level must be nonnegative");
    let m = p.num_vars();
    let mut x = x0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);

    let mut fixed_dirs: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        fixed_dirs.push(e);
    }
    for g in 0..p.num_constraints() {
        let (row, _) = p.constraint_row(g);
        let norm = row.norm();
        if norm > 1e-12 {
            fixed_dirs.push(row / norm);
        }
    }

    let kink_tol = 1e-7
        * (1.0
            + if p.num_constraints() > 0 {
                p.stacked_rhs().amax()
            } else {
                0.0
            });
    let mut stalls = 0;
    for _ in 0..MAX_SWEEPS {
        let before = p.penalized_objective(&x, rho);
        for u in &fixed_dirs {
            let t = line_minimum(p, &x, u, rho);
            if t != 0.0 {
                x += u * t;
            }
        }
        let binding: Vec<DVector<f64>> = (0..p.num_constraints())
            .filter(|&g| p.constraint_residual(g, &x).abs() <= kink_tol)
            .map(|g| p.constraint_row(g).0)
            .collect();
        if !binding.is_empty() {
            /* slide along every binding kink at once, and along every
             * leave-one-out subset so a single wrong kink can be released
             * while the rest stay tight */
            let mut bases = vec![kink_tangent_basis(&binding, m)];
            if binding.len() > 1 {
                for skip in 0..binding.len() {
                    let subset: Vec<DVector<f64>> = binding
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, row)| row.clone())
                        .collect();
                    bases.push(kink_tangent_basis(&subset, m));
                }
            }
            for basis in bases {
                for u in basis {
                    let t = line_minimum(p, &x, &u, rho);
                    if t != 0.0 {
                        x += u * t;
                    }
                }
            }
        }
        for _ in 0..2 {
            let mut u = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let norm = u.norm();
            if norm > 1e-12 {
                u /= norm;
                let t = line_minimum(p, &x, &u, rho);
                if t != 0.0 {
                    x += u * t;
                }
            }
        }
        let after = p.penalized_objective(&x, rho);
        if before - after <= 1e-13 * (1.0 + before.abs()) {
            stalls += 1;
            if stalls >= STALL_SWEEPS {
                return Ok(snap_to_configuration(p, rho, x, kink_tol));
            }
        } else {
            stalls = 0;
        }
    }
    Err(OracleError::NonConvergence { sweeps: MAX_SWEEPS })
}

/// Polish a near-minimizer: read off which rows are binding and which side
/// the rest sit on, solve that configuration's stationarity system exactly,
/// and keep the result only when it does not increase the objective.
fn snap_to_configuration(p: &QpProblem, rho: f64, x: DVector<f64>, kink_tol: f64) -> DVector<f64> {
    let m = p.num_vars();
    let r = p.num_eq();
    let mut binding = Vec::new();
    let mut forcing = DVector::zeros(m);
    for g in 0..p.num_constraints() {
        let res = p.constraint_residual(g, &x);
        let (row, _) = p.constraint_row(g);
        if res.abs() <= kink_tol {
            binding.push(g);
        } else if g < r {
            forcing += row * res.signum();
        } else if res > 0.0 {
            forcing += row;
        }
    }
    if binding.len() > m {
        return x;
    }
    let k = binding.len();
    let mut kkt = DMatrix::<f64>::zeros(m + k, m + k);
    kkt.view_mut((0, 0), (m, m)).copy_from(p.quadratic());
    let mut rhs = DVector::<f64>::zeros(m + k);
    rhs.rows_mut(0, m)
        .copy_from(&(-p.linear() - &forcing * rho));
    for (slot, &g) in binding.iter().enumerate() {
        let (row, target) = p.constraint_row(g);
        for col in 0..m {
            kkt[(m + slot, col)] = row[col];
            kkt[(col, m + slot)] = row[col];
        }
        rhs[m + slot] = target;
    }
    match kkt.lu().solve(&rhs) {
        Some(z) => {
            let candidate = z.rows(0, m).into_owned();
            if p.penalized_objective(&candidate, rho) <= p.penalized_objective(&x, rho) {
                candidate
            } else {
                x
            }
        }
        None => x,
    }
}

/// Orthonormal basis of the subspace orthogonal to every row in `rows`,
/// built by Gram-Schmidt sweeps over the coordinate axes.
fn kink_tangent_basis(rows: &[DVector<f64>], m: usize) -> Vec<DVector<f64>> {
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut v = row.clone();
        /* project twice: a second pass cleans up the rounding the first leaves */
        for _ in 0..2 {
            for q in &ortho {
                let coeff = q.dot(&v);
                v -= q * coeff;
            }
        }
        let norm = v.norm();
        if norm > 1e-10 {
            ortho.push(v / norm);
        }
    }
    let mut tangents: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        for _ in 0..2 {
            for q in ortho.iter().chain(tangents.iter()) {
                let coeff = q.dot(&v);
                v -= q * coeff;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            tangents.push(v / norm);
        }
    }
    tangents
}

/* One penalty term restricted to the line x + t u: value a + b t, either an
 * absolute-value term (equality row) or a positive-part term (inequality). */
struct LineTerm {
    a: f64,
    b: f64,
    hinge: bool,
}

/// Exact minimizer over `t` of the penalized objective along `x + t u`.
fn line_minimum(p: &QpProblem, x: &DVector<f64>, u: &DVector<f64>, rho: f64) -> f64 {
    let alpha = u.dot(&(p.quadratic() * u));
    debug_assert!(
        alpha > 0.0,
        "line curvature must be positive for a definite quadratic"
    );
    let beta = (p.quadratic() * x + p.linear()).dot(u);

    let r = p.num_eq();
    let mut terms = Vec::with_capacity(p.num_constraints());
    for g in 0..p.num_constraints() {
        let (row, rhs) = p.constraint_row(g);
        terms.push(LineTerm {
            a: row.dot(x) - rhs,
            b: row.dot(u),
            hinge: g >= r,
        });
    }

    /* directional objective, dropping the t-independent smooth constant */
    let phi = |t: f64| -> f64 {
        let mut v = 0.5 * alpha * t * t + beta * t;
        for term in &terms {
            let res = term.a + term.b * t;
            v += rho * if term.hinge { res.max(0.0) } else { res.abs() };
        }
        v
    };
    /* slope contributed by the penalty at a point off every breakpoint */
    let penalty_slope = |t: f64| -> f64 {
        let mut slope = 0.0;
        for term in &terms {
            let res = term.a + term.b * t;
            if term.hinge {
                if res > 0.0 {
                    slope += term.b;
                }
            } else if res > 0.0 {
                slope += term.b;
            } else if res < 0.0 {
                slope -= term.b;
            }
        }
        rho * slope
    };

    let mut breaks: Vec<f64> = terms
        .iter()
        .filter(|term| term.b.abs() > 1e-14)
        .map(|term| -term.a / term.b)
        .collect();
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    breaks.dedup();

    /* the derivative is affine with slope alpha between breakpoints, so one
     * representative point per interval pins down that interval's root */
    let mut candidates = vec![0.0];
    candidates.extend_from_slice(&breaks);
    let mut reps = Vec::with_capacity(breaks.len() + 1);
    if breaks.is_empty() {
        reps.push(0.0);
    } else {
        reps.push(breaks[0] - 1.0);
        for w in breaks.windows(2) {
            reps.push(0.5 * (w[0] + w[1]));
        }
        reps.push(breaks[breaks.len() - 1] + 1.0);
    }
    for rep in reps {
        let d = alpha * rep + beta + penalty_slope(rep);
        candidates.push(rep - d / alpha);
    }

    let mut best_t = 0.0;
    let mut best_v = phi(0.0);
    for &t in &candidates {
        if t.is_finite() {
            let v = phi(t);
            if v < best_v {
                best_v = v;
                best_t = t;
            }
        }
    }
    best_t
}

/// Weighted isotone regression by pooling adjacent violators.
///
/// Scans left to right, starting a block per observation and merging a new
/// block into its predecessor while the predecessor's weighted mean exceeds
/// it; each merged block's mean is the weighted mean of its members. The
/// fit repeats every block mean across that block.
pub fn pava_isotone(y: &DVector<f64>, weights: &DVector<f64>) -> DVector<f64> {
    assert_eq!(y.len(), weights.len(), "one weight per observation");
    assert!(weights.iter().all(|&w| w > 0.0), "weights must be positive");

    /* (weighted sum, total weight, member count) per pooled block */
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        blocks.push((weights[i] * y[i], weights[i], 1));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 / prev.1 > last.0 / last.1 {
                blocks.pop();
                let top = blocks.last_mut().unwrap();
                top.0 += last.0;
                top.1 += last.1;
                top.2 += last.2;
            } else {
                break;
            }
        }
    }

    let mut fit = DVector::zeros(y.len());
    let mut pos = 0;
    for (sum, weight, count) in blocks {
        for _ in 0..count {
            fit[pos] = sum / weight;
            pos += 1;
        }
    }
    fit
}

/// A random symmetric positive definite matrix `G'G + 0.1 I` with standard
/// normal `G`; the ridge keeps the spectrum bounded away from zero.
pub fn random_spd_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let mut a = g.transpose() * &g;
    for i in 0..dim {
        a[(i, i)] += 0.1;
    }
    a
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| scale * std_normal(rng))
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// A random strictly convex problem with `r` equality and `s` inequality
/// rows, built around a hidden point that satisfies the equalities exactly
/// and every inequality with strictly positive slack, so the constraint set
/// always has a feasible interior relative to the equalities.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, m: usize, r: usize, s: usize) -> QpProblem {
    for _ in 0..32 {
        let a = random_spd_matrix(rng, m);
        let b = random_vector(rng, m, 1.0);
        let x_feas = random_vector(rng, m, 0.5);
        let v = random_matrix(rng, r, m);
        let d = &v * &x_feas;
        let w = random_matrix(rng, s, m);
        let mut e = &w * &x_feas;
        for j in 0..s {
            e[j] += 0.1 + 0.5 * std_normal(rng).abs();
        }
        if let Ok(p) = QpProblem::new(a, b, 0.0, v, d, w, e) {
            return p;
        }
        /* retry: random rows were numerically dependent, which has
         * probability zero in exact arithmetic */
    }
    panic!("random constraint rows kept failing the independence check");
}

/// A random regression problem: standard normal design, noisy linear
/// response, and `r + s` feasible constraint rows as in [`random_problem`].
pub fn random_least_squares_problem<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    r: usize,
    s: usize,
) -> QpProblem {
    for _ in 0..32 {
        let design = random_matrix(rng, n, m);
        let coef = random_vector(rng, m, 1.0);
        let response = &design * &coef + random_vector(rng, n, 0.3);
        let x_feas = random_vector(rng, m, 0.5);
        let v = random_matrix(rng, r, m);
        let d = &v * &x_feas;
        let w = random_matrix(rng, s, m);
        let mut e = &w * &x_feas;
        for j in 0..s {
            e[j] += 0.1 + 0.5 * std_normal(rng).abs();
        }
        if let Ok(p) = QpProblem::from_least_squares(design, response, None, v, d, w, e) {
            return p;
        }
    }
    panic!("random problem generation kept failing validation");
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn toy_problem() -> QpProblem {
        QpProblem::new(
            dmatrix![4.0, 2.05; 2.05, 1.2025],
            dvector![-3.0, -1.735],
            0.0,
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0],
            dvector![0.0, 0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn enumeration_solves_the_toy_problem() {
        let sol = solve_constrained_enumeration(&toy_problem()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 167.0 / 441.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 274.0 / 441.0, epsilon = 1e-9);
        assert_eq!(sol.active_set, vec![2]);
        assert_abs_diff_eq!(sol.multipliers[0], 0.23325 / 1.1025, epsilon = 1e-9);
        assert_abs_diff_eq!(
            sol.objective,
            toy_problem().objective(&sol.x),
            epsilon = 1e-12
        );
    }

    #[test]
    fn enumeration_returns_the_interior_optimum_untouched() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            dvector![-0.2, -0.3],
            0.0,
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            dmatrix![1.0, 1.0],
            dvector![10.0],
        )
        .unwrap();
        let sol = solve_constrained_enumeration(&p).unwrap();
        assert_abs_diff_eq!(sol.x[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 0.3, epsilon = 1e-12);
        assert!(sol.active_set.is_empty());
        assert!(sol.multipliers.is_empty());
    }

    #[test]
    fn enumeration_detects_an_empty_constraint_set() {
        /* x1 >= 1, x2 >= 1, x1 + x2 <= 1: pairwise satisfiable, jointly empty */
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            0.0,
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0],
            dvector![-1.0, -1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            solve_constrained_enumeration(&p),
            Err(OracleError::Infeasible)
        ));
    }

    fn fish_isotone_problem() -> QpProblem {
        let y = dvector![0.3752, 0.3202, 0.2775, 0.3043, 0.5327];
        let mut w = DMatrix::zeros(4, 5);
        for k in 0..4 {
            w[(k, k)] = 1.0;
            w[(k, k + 1)] = -1.0;
        }
        QpProblem::new(
            DMatrix::identity(5, 5),
            -y,
            0.0,
            DMatrix::zeros(0, 5),
            DVector::zeros(0),
            w,
            DVector::zeros(4),
        )
        .unwrap()
    }

    #[test]
    fn enumeration_agrees_with_pooling_on_the_fish_data() {
        let sol = solve_constrained_enumeration(&fish_isotone_problem()).unwrap();
        let pooled = pava_isotone(
            &dvector![0.3752, 0.3202, 0.2775, 0.3043, 0.5327],
            &DVector::from_element(5, 1.0),
        );
        for i in 0..5 {
            assert_abs_diff_eq!(sol.x[i], pooled[i], epsilon = 1e-9);
        }
        for i in 0..4 {
            assert_abs_diff_eq!(pooled[i], 1.2772 / 4.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pooled[4], 0.5327, epsilon = 1e-12);
    }

    #[test]
    fn pooling_leaves_monotone_input_unchanged() {
        let y = dvector![1.0, 2.0, 2.0, 3.5];
        let fit = pava_isotone(&y, &DVector::from_element(4, 1.0));
        for i in 0..4 {
            assert_abs_diff_eq!(fit[i], y[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn pooling_collapses_reversed_input_to_the_grand_mean() {
        let fit = pava_isotone(&dvector![3.0, 2.0, 1.0], &DVector::from_element(3, 1.0));
        for i in 0..3 {
            assert_abs_diff_eq!(fit[i], 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn pooling_respects_weights() {
        /* pooled mean of (3, 1) with weights (1, 3) is (3 + 3) / 4 */
        let fit = pava_isotone(&dvector![3.0, 1.0], &dvector![1.0, 3.0]);
        assert_abs_diff_eq!(fit[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fit[1], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn penalized_search_at_zero_level_finds_the_smooth_minimum() {
        let p = toy_problem();
        let x = minimize_penalized_grid(&p, 0.0, &DVector::zeros(2)).unwrap();
        assert_abs_diff_eq!(x[0], 0.05075 / 0.6075, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 0.79 / 0.6075, epsilon = 1e-8);
    }

    #[test]
    fn penalized_search_matches_the_known_mid_level_point() {
        let p = toy_problem();
        let x = minimize_penalized_grid(&p, 0.1, &DVector::zeros(2)).unwrap();
        assert_abs_diff_eq!(x[0], 271.0 / 1215.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1], 1190.0 / 1215.0, epsilon = 1e-6);
    }

    #[test]
    fn penalized_search_at_a_large_level_reaches_the_constrained_optimum() {
        let p = toy_problem();
        let constrained = solve_constrained_enumeration(&p).unwrap();
        /* well past ten times the largest multiplier (~0.212) */
        let x = minimize_penalized_grid(&p, 5.0, &DVector::zeros(2)).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(x[i], constrained.x[i], epsilon = 1e-5);
        }
    }

    #[test]
    fn random_problems_are_well_posed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_problem(&mut rng, 5, 1, 3);
        assert_eq!(p.num_vars(), 5);
        assert_eq!(p.num_eq(), 1);
        assert_eq!(p.num_ineq(), 3);
        assert!(p.quadratic().clone().cholesky().is_some());
        assert!(solve_constrained_enumeration(&p).is_ok());

        let ls = random_least_squares_problem(&mut rng, 12, 4, 0, 3);
        assert_eq!(ls.num_vars(), 4);
        assert!(ls.least_squares().is_some());
        assert!(solve_constrained_enumeration(&ls).is_ok());
    }

    #[test]
    fn the_two_reference_solvers_agree_at_a_dominating_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, 4, 1, 2);
        let constrained = solve_constrained_enumeration(&p).unwrap();
        let rho = 10.0 * constrained.multipliers.amax().max(0.1) + 1.0;
        let x = minimize_penalized_grid(&p, rho, &DVector::zeros(4)).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(x[i], constrained.x[i], epsilon = 1e-5);
        }
    }
}
