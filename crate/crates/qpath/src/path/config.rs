//! Boundary-configuration resolution.
//!
//! When several residuals and subgradient coefficients reach their
//! boundaries at the same penalty level (or sit there at level zero), the
//! next active set is not determined by a single pivot. The resolver walks
//! the `2^a` active/inactive assignments of the `a` boundary candidates in
//! gray-code order, one sweep or inverse sweep per step, and accepts the
//! assignment under which every active coefficient stays inside (or moves
//! into) its subdifferential and every inactive residual moves to the side
//! it is claimed to be on.

use nalgebra::DVector;

use crate::problem::QpProblem;
use crate::sweep::SymmetricTableau;

use super::{coefficient_bounds, pinned_coefficient, PathError, Region};

/// One boundary candidate: a constraint that may be active or inactive in
/// the next configuration. `sides` lists the admissible inactive regions
/// (one entry when the side is pinned by continuity, two at level zero
/// where the constraint has no incoming side).
#[derive(Debug, Clone)]
pub(crate) struct CandidateSpec {
    pub g: usize,
    pub sides: Vec<Region>,
}

/// Read-only view of a hypothetical configuration: tableau plus the region
/// and coefficient assignment to evaluate it under.
pub(crate) struct ConfigView<'a> {
    pub m: usize,
    pub tableau: &'a SymmetricTableau,
    pub region: &'a [Region],
    pub coeff: &'a [f64],
}

impl ConfigView<'_> {
    fn border(&self) -> usize {
        self.tableau.dim() - 1
    }

    /// Intercept and slope (in `rho`) of constraint `g`'s tableau line:
    /// the residual line when `g` is inactive, the multiplier line when
    /// `g` is active.
    pub fn constraint_line(&self, g: usize) -> (f64, f64) {
        let row = self.m + g;
        let intercept = self.tableau.get(row, self.border());
        let mut slope = 0.0;
        for (h, (&region, &coeff)) in self.region.iter().zip(self.coeff.iter()).enumerate() {
            if region != Region::Active && coeff != 0.0 {
                slope -= coeff * self.tableau.get(row, self.m + h);
            }
        }
        (intercept, slope)
    }

    /// Intercept and slope vectors of the solution: `x(rho) = base + rho * slope`.
    pub fn solution_line(&self) -> (DVector<f64>, DVector<f64>) {
        let border = self.border();
        let base = DVector::from_fn(self.m, |i, _| self.tableau.get(i, border));
        let mut slope = DVector::zeros(self.m);
        for (h, (&region, &coeff)) in self.region.iter().zip(self.coeff.iter()).enumerate() {
            if region != Region::Active && coeff != 0.0 {
                for i in 0..self.m {
                    slope[i] -= coeff * self.tableau.get(i, self.m + h);
                }
            }
        }
        (base, slope)
    }
}

/// Tolerances used by the validity checks.
pub(crate) struct ConfigTols {
    /// Residual magnitude treated as "on the boundary".
    pub residual: f64,
    /// Slope magnitude below which a residual counts as not moving.
    pub slope: f64,
    /// Coefficient slack at the subdifferential boundaries.
    pub coefficient: f64,
    /// Multiplier-intercept scale: at level zero the intercept must vanish,
    /// and at a boundary its sign decides the direction of motion.
    pub intercept: f64,
}

/// Checks whether the configuration in `view` is self-consistent at level
/// `rho`: active coefficients inside (or moving into) their
/// subdifferentials, inactive residuals on (or moving to) their claimed
/// sides.
pub(crate) fn config_is_valid(
    view: &ConfigView<'_>,
    problem: &QpProblem,
    rho: f64,
    tols: &ConfigTols,
) -> bool {
    for g in 0..problem.num_constraints() {
        let (kind, _) = problem.constraint_kind(g);
        let (intercept, slope) = view.constraint_line(g);
        match view.region[g] {
            Region::Active => {
                let (lo, hi) = coefficient_bounds(kind);
                let value = if rho > 0.0 {
                    intercept / rho + slope
                } else {
                    /* at level zero a nonvanishing intercept makes the
                    coefficient blow up as rho -> 0+ */
                    if intercept.abs() > tols.intercept {
                        return false;
                    }
                    slope
                };
                if value < lo - tols.coefficient || value > hi + tols.coefficient {
                    return false;
                }
                if rho > 0.0 {
                    /* d(coefficient)/d(rho) has the opposite sign of the
                    intercept; at a boundary it must point inward */
                    if value >= hi - tols.coefficient && intercept < -tols.intercept {
                        return false;
                    }
                    if value <= lo + tols.coefficient && intercept > tols.intercept {
                        return false;
                    }
                }
            }
            Region::Negative => {
                let value = intercept + rho * slope;
                if value > tols.residual {
                    return false;
                }
                if value > -tols.residual && slope > tols.slope {
                    return false;
                }
            }
            Region::Positive => {
                let value = intercept + rho * slope;
                if value < -tols.residual {
                    return false;
                }
                if value < tols.residual && slope < -tols.slope {
                    return false;
                }
            }
        }
    }
    true
}

/// A configuration that passed the validity checks.
pub(crate) struct ValidConfig {
    pub bits: u32,
    pub regions: Vec<(usize, Region)>,
    pub solution_slope: DVector<f64>,
    pub active_count: usize,
}

/// Walks all active/inactive assignments of `candidates` (times the
/// admissible side choices of the inactive ones) and collects the valid
/// configurations.
///
/// `initial_bits` encodes the candidates' current membership (bit set =
/// currently swept); the walk starts there so the first configuration
/// costs no pivots, and each gray-code step costs exactly one.
pub(crate) struct ConfigSearch<'p> {
    pub problem: &'p QpProblem,
    pub rho: f64,
    pub tols: ConfigTols,
}

impl ConfigSearch<'_> {
    pub fn run(
        &self,
        base_tableau: &SymmetricTableau,
        base_region: &[Region],
        base_coeff: &[f64],
        candidates: &[CandidateSpec],
    ) -> Result<(Vec<ValidConfig>, usize), PathError> {
        let a = candidates.len();
        if a > 16 {
            return Err(PathError::ConfigurationSearchTooLarge {
                rho: self.rho,
                candidates: a,
            });
        }
        let m = self.problem.num_vars();
        let initial_bits: u32 = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| base_region[c.g] == Region::Active)
            .map(|(i, _)| 1u32 << i)
            .sum();

        let mut walk = base_tableau.clone();
        let mut walk_bits: Option<u32> = Some(initial_bits);
        let mut region = base_region.to_vec();
        let mut coeff = base_coeff.to_vec();
        let mut valid = Vec::new();
        let mut tried = 0usize;

        for code in 0..(1u32 << a) {
            let bits = (code ^ (code >> 1)) ^ initial_bits;
            /* move the walk tableau to `bits`, one pivot when possible,
            rebuilding from the base after a failed pivot */
            let reachable = match walk_bits {
                Some(prev) if prev == bits => true,
                Some(prev) if (prev ^ bits).count_ones() == 1 => {
                    let i = (prev ^ bits).trailing_zeros() as usize;
                    /* a failed step leaves the tableau untouched; retry from
                    the base in case another pivot order reaches the subset */
                    self.toggle(&mut walk, m + candidates[i].g).is_ok()
                        || self.rebuild(&mut walk, base_tableau, candidates, initial_bits, bits)
                }
                _ => self.rebuild(&mut walk, base_tableau, candidates, initial_bits, bits),
            };
            if reachable {
                walk_bits = Some(bits);
            } else {
                walk = base_tableau.clone();
                walk_bits = Some(initial_bits);
                continue;
            }

            /* assign candidate regions for this subset, then iterate the
            side choices of the inactive candidates */
            let inactive: Vec<usize> = (0..a).filter(|i| bits & (1 << i) == 0).collect();
            let mut side_counter = vec![0usize; inactive.len()];
            loop {
                #[allow(clippy::needless_range_loop)]
                for i in 0..a {
                    let g = candidates[i].g;
                    if bits & (1 << i) != 0 {
                        region[g] = Region::Active;
                        coeff[g] = 0.0;
                    }
                }
                for (slot, &i) in inactive.iter().enumerate() {
                    let g = candidates[i].g;
                    let side = candidates[i].sides[side_counter[slot]];
                    let (kind, _) = self.problem.constraint_kind(g);
                    region[g] = side;
                    coeff[g] = pinned_coefficient(kind, side);
                }
                tried += 1;
                let view = ConfigView {
                    m,
                    tableau: &walk,
                    region: &region,
                    coeff: &coeff,
                };
                if config_is_valid(&view, self.problem, self.rho, &self.tols) {
                    let (_, slope) = view.solution_line();
                    valid.push(ValidConfig {
                        bits,
                        regions: candidates.iter().map(|c| (c.g, region[c.g])).collect(),
                        solution_slope: slope,
                        active_count: region.iter().filter(|&&r| r == Region::Active).count(),
                    });
                }
                /* next side combination (mixed-radix increment) */
                let mut slot = 0;
                loop {
                    if slot == inactive.len() {
                        break;
                    }
                    side_counter[slot] += 1;
                    if side_counter[slot] < candidates[inactive[slot]].sides.len() {
                        break;
                    }
                    side_counter[slot] = 0;
                    slot += 1;
                }
                if slot == inactive.len() {
                    break;
                }
            }
            /* restore the baseline regions/coefficients for the next subset */
            for c in candidates {
                region[c.g] = base_region[c.g];
                coeff[c.g] = base_coeff[c.g];
            }
        }
        Ok((valid, tried))
    }

    fn toggle(&self, tab: &mut SymmetricTableau, diag: usize) -> Result<(), PathError> {
        let r = if tab.is_swept(diag) {
            tab.inverse_sweep(diag)
        } else {
            tab.sweep(diag)
        };
        r.map_err(PathError::from)
    }

    fn rebuild(
        &self,
        walk: &mut SymmetricTableau,
        base: &SymmetricTableau,
        candidates: &[CandidateSpec],
        initial_bits: u32,
        bits: u32,
    ) -> bool {
        *walk = base.clone();
        let diff = initial_bits ^ bits;
        for (i, c) in candidates.iter().enumerate() {
            if diff & (1 << i) != 0 && self.toggle(walk, self.problem.num_vars() + c.g).is_err() {
                return false;
            }
        }
        true
    }
}
