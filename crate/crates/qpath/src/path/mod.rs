//! The penalty-level path engine.
//!
//! The minimizer of the penalized objective is piecewise linear in the
//! level `rho`. Within a segment the active constraints (zero residual)
//! are fixed; the solution, every inactive residual, and every active
//! multiplier are affine in `rho`, with intercepts and slopes read off a
//! partially swept tableau. A segment ends when an inactive residual hits
//! zero (sweep that constraint in) or an active coefficient reaches its
//! subdifferential boundary (inverse-sweep it out). Simultaneous events
//! are handed to the configuration resolver in [`config`].

mod config;

use nalgebra::DVector;

use crate::problem::{ConstraintKind, QpProblem};
use crate::sweep::{SweepError, SymmetricTableau};

use config::{config_is_valid, CandidateSpec, ConfigSearch, ConfigTols, ConfigView};

/// Errors raised by the path engine.
#[derive(Debug, Clone, PartialEq)]
pub enum PathError {
    /// The quadratic term failed its definiteness check while sweeping.
    NotPositiveDefinite { index: usize, value: f64 },
    /// A pivot needed by an event fell below tolerance.
    PivotTooSmall { index: usize, value: f64 },
    /// No active/inactive assignment of the boundary candidates was
    /// self-consistent.
    NoValidConfiguration {
        rho: f64,
        candidates: Vec<usize>,
        configurations_tried: usize,
    },
    /// Two materially different assignments were both self-consistent.
    AmbiguousConfiguration { rho: f64, candidates: Vec<usize> },
    /// More simultaneous boundary candidates than the resolver enumerates.
    ConfigurationSearchTooLarge { rho: f64, candidates: usize },
    /// The segment cap was reached before the path terminated.
    MaxSegmentsExceeded { limit: usize },
    /// The path stalled with constraints still violated, which for a
    /// strictly convex objective means the constraints admit no feasible
    /// point.
    Infeasible { rho: f64, violated: Vec<usize> },
}

impl std::fmt::Display for PathError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathError::NotPositiveDefinite { index, value } => write!(
                f,
                "quadratic term is not positive definite: pivot {value:e} at diagonal {index}"
            ),
            PathError::PivotTooSmall { index, value } => {
                write!(f, "pivot at diagonal {index} too small: {value:e}")
            }
            PathError::NoValidConfiguration {
                rho,
                candidates,
                configurations_tried,
            } => write!(
                f,
                "no consistent configuration at rho = {rho} for candidates {candidates:?} ({configurations_tried} tried)"
            ),
            PathError::AmbiguousConfiguration { rho, candidates } => write!(
                f,
                "multiple consistent configurations at rho = {rho} for candidates {candidates:?}"
            ),
            PathError::ConfigurationSearchTooLarge { rho, candidates } => write!(
                f,
                "too many simultaneous boundary candidates at rho = {rho}: {candidates}"
            ),
            PathError::MaxSegmentsExceeded { limit } => {
                write!(f, "segment cap {limit} exceeded before termination")
            }
            PathError::Infeasible { rho, violated } => write!(
                f,
                "path stalled at rho = {rho} with violated constraints {violated:?}: problem is infeasible"
            ),
        }
    }
}

impl std::error::Error for PathError {}

impl From<SweepError> for PathError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::PivotTooSmall { index, value } => PathError::PivotTooSmall { index, value },
            SweepError::NotPositiveDefinite { index, value } => {
                PathError::NotPositiveDefinite { index, value }
            }
            /* construction errors cannot come out of pivoting a tableau the
            engine built itself */
            SweepError::NotSymmetric { .. } | SweepError::NotSquare { .. } => {
                unreachable!("tableau built by the engine is square and symmetric")
            }
        }
    }
}

/// Sign class of a constraint's residual: strictly negative, pinned to
/// zero (active), or strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Negative,
    Active,
    Positive,
}

/// Subdifferential bounds of a constraint's penalty coefficient.
pub(crate) fn coefficient_bounds(kind: ConstraintKind) -> (f64, f64) {
    match kind {
        ConstraintKind::Equality => (-1.0, 1.0),
        ConstraintKind::Inequality => (0.0, 1.0),
    }
}

/// Coefficient value forced on an inactive constraint by its region.
pub(crate) fn pinned_coefficient(kind: ConstraintKind, region: Region) -> f64 {
    match (kind, region) {
        (_, Region::Active) => panic!("active constraints have no pinned coefficient"),
        (ConstraintKind::Equality, Region::Negative) => -1.0,
        (ConstraintKind::Equality, Region::Positive) => 1.0,
        (ConstraintKind::Inequality, Region::Negative) => 0.0,
        (ConstraintKind::Inequality, Region::Positive) => 1.0,
    }
}

/// Tolerances and caps for the path engine.
#[derive(Debug, Clone)]
pub struct PathOptions {
    /// Residual classification tolerance factor; the effective tolerance is
    /// this times `1 + max |rhs|`.
    pub residual_tol_factor: f64,
    /// Event-time comparison factor; two times within `factor * (1 + rho)`
    /// coincide.
    pub time_tol_factor: f64,
    /// Below this magnitude a rate is treated as zero and produces no event.
    pub denominator_tol: f64,
    /// Pivot tolerance factor handed to the tableau.
    pub pivot_tol_factor: f64,
    /// Slack allowed on subdifferential bounds.
    pub coefficient_tol: f64,
    /// Segment cap; `None` means `50 * (number of constraints)`, at least 1.
    pub max_segments: Option<usize>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            residual_tol_factor: 1e-9,
            time_tol_factor: 1e-9,
            denominator_tol: 1e-12,
            pivot_tol_factor: 1e-12,
            coefficient_tol: 1e-8,
            max_segments: None,
        }
    }
}

/// Within-kind index sets of the three regions, equalities and
/// inequalities separately.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSets {
    pub negative_eq: Vec<usize>,
    pub active_eq: Vec<usize>,
    pub positive_eq: Vec<usize>,
    pub negative_ineq: Vec<usize>,
    pub active_ineq: Vec<usize>,
    pub positive_ineq: Vec<usize>,
}

/// One active constraint in a segment snapshot, with its multiplier line
/// `lambda(rho) = intercept + rho * slope`; the subgradient coefficient at
/// any level inside the segment is `lambda(rho) / rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveConstraint {
    pub kind: ConstraintKind,
    pub index: usize,
    /// Coefficient at the segment start.
    pub coefficient: f64,
    pub multiplier_intercept: f64,
    pub multiplier_slope: f64,
}

impl ActiveConstraint {
    /// Subgradient coefficient at level `rho` (must be positive).
    pub fn coefficient_at(&self, rho: f64) -> f64 {
        if rho > 0.0 {
            self.multiplier_intercept / rho + self.multiplier_slope
        } else {
            self.coefficient
        }
    }
}

/// What ended a segment.
#[derive(Debug, Clone, PartialEq)]
pub enum PathEvent {
    /// An inactive residual reached zero and the constraint was swept in.
    Hit { kind: ConstraintKind, index: usize },
    /// An active coefficient reached a subdifferential boundary and the
    /// constraint was swept out to the given side.
    Escape {
        kind: ConstraintKind,
        index: usize,
        to: Region,
    },
    /// Simultaneous boundary candidates, resolved by configuration search;
    /// lists each candidate's resolved region.
    Reconfigured {
        changes: Vec<(ConstraintKind, usize, Region)>,
    },
    /// No further events: the path is constant from here on.
    Terminal,
}

/// One maximal interval of constant configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub rho_start: f64,
    /// End of the interval; infinite on the terminal segment.
    pub rho_end: f64,
    pub x_start: DVector<f64>,
    /// `d x / d rho` on the segment.
    pub slope: DVector<f64>,
    pub active: Vec<ActiveConstraint>,
    pub event: PathEvent,
    /// Degrees of freedom: variables minus active constraints.
    pub df: usize,
}

impl PathSegment {
    /// Solution at a level inside the segment.
    pub fn solution_at(&self, rho: f64) -> DVector<f64> {
        &self.x_start + &self.slope * (rho - self.rho_start)
    }

    /// Whether `rho` lies in `[rho_start, rho_end)`.
    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.rho_start && rho < self.rho_end
    }
}

/// Record of one resolved boundary anomaly.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRecord {
    pub rho: f64,
    /// Global indices of the boundary candidates.
    pub candidates: Vec<usize>,
    pub configurations_tried: usize,
    /// Resolved region per candidate.
    pub resolution: Vec<(usize, Region)>,
    /// Number of valid configurations that shared the accepted dynamics
    /// (greater than one when equivalent configurations were tie-broken).
    pub equivalent_configurations: usize,
}

/// The complete solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub segments: Vec<PathSegment>,
    pub terminal_x: DVector<f64>,
    /// Level at which the path becomes constant.
    pub terminal_rho: f64,
    pub anomalies: Vec<AnomalyRecord>,
}

impl SolutionPath {
    /// The segment containing `rho` (negative levels clamp to the first).
    pub fn segment_at(&self, rho: f64) -> &PathSegment {
        let mut chosen = &self.segments[0];
        for seg in &self.segments {
            if seg.rho_start <= rho {
                chosen = seg;
            } else {
                break;
            }
        }
        chosen
    }

    /// Solution at any level, by linear interpolation inside the
    /// containing segment.
    pub fn solution_at(&self, rho: f64) -> DVector<f64> {
        let rho = rho.max(0.0);
        self.segment_at(rho).solution_at(rho)
    }

    /// The breakpoints of the path, starting at zero.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.rho_start).collect()
    }
}

/// Builds the bordered tableau the engine pivots on: the negated quadratic
/// term, the negated stacked constraint rows, the linear term, and the
/// negated stacked right-hand sides, with a zero corner. Dimension is
/// `variables + constraints + 1`; nothing is swept yet.
pub fn build_initial_tableau(p: &QpProblem) -> SymmetricTableau {
    let m = p.num_vars();
    let n_c = p.num_constraints();
    let dim = m + n_c + 1;
    let border = dim - 1;
    let mut tab = SymmetricTableau::zeros(dim);
    let a = p.quadratic();
    for i in 0..m {
        for j in 0..=i {
            tab.set(i, j, -a[(i, j)]);
        }
    }
    let u = p.stacked_constraints();
    let rhs = p.stacked_rhs();
    for g in 0..n_c {
        for j in 0..m {
            tab.set(m + g, j, -u[(g, j)]);
        }
        tab.set(m + g, border, -rhs[g]);
    }
    for (j, &bj) in p.linear().iter().enumerate() {
        tab.set(border, j, bj);
    }
    tab.set(border, border, 0.0);
    tab.reset_pivot_tolerance();
    tab
}

/// Result of advancing the path by one event.
/* exactly one value of this type is alive per advance call, so the size
gap between variants is not worth a box */
#[allow(clippy::large_enum_variant)]
pub enum Advance<'p> {
    /// A segment was closed by an event; the state is positioned at its end.
    Step {
        segment: PathSegment,
        state: PathState<'p>,
    },
    /// No further events: the closed segment extends to infinity.
    Finished {
        segment: PathSegment,
        anomalies: Vec<AnomalyRecord>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventCandidate {
    Hit { g: usize },
    Escape { g: usize, to: Region },
}

impl EventCandidate {
    fn constraint(&self) -> usize {
        match *self {
            EventCandidate::Hit { g } | EventCandidate::Escape { g, .. } => g,
        }
    }
}

/// Live state of the path at one penalty level: the partially swept
/// tableau, each constraint's region, and the current coefficients.
#[derive(Debug, Clone)]
pub struct PathState<'p> {
    problem: &'p QpProblem,
    opts: PathOptions,
    tableau: SymmetricTableau,
    region: Vec<Region>,
    coeff: Vec<f64>,
    rho: f64,
    x: DVector<f64>,
    anomalies: Vec<AnomalyRecord>,
    residual_tol: f64,
    intercept_tol: f64,
}

impl<'p> PathState<'p> {
    /// Sweeps the variable block and classifies every residual at level
    /// zero. Residuals on the boundary are handed to the configuration
    /// resolver with both sides admissible.
    pub fn initialize(problem: &'p QpProblem, opts: PathOptions) -> Result<Self, PathError> {
        let m = problem.num_vars();
        let n_c = problem.num_constraints();
        let mut tableau = build_initial_tableau(problem);
        tableau.set_pivot_tolerance_factor(opts.pivot_tol_factor);
        for k in 0..m {
            let d = tableau.get(k, k);
            /* the variable block holds the negated quadratic term, so
            definiteness shows as strictly negative pivots */
            if d >= -tableau.pivot_tolerance() {
                return Err(PathError::NotPositiveDefinite { index: k, value: d });
            }
            tableau.sweep(k)?;
        }
        let rhs_scale = problem.stacked_rhs().amax();
        let residual_tol = opts.residual_tol_factor * (1.0 + rhs_scale);
        let intercept_tol = opts.coefficient_tol * (1.0 + problem.linear().amax() + rhs_scale);
        let border = m + n_c;
        let mut region = Vec::with_capacity(n_c);
        let mut coeff = Vec::with_capacity(n_c);
        let mut boundary = Vec::new();
        for g in 0..n_c {
            let res = tableau.get(m + g, border);
            let (kind, _) = problem.constraint_kind(g);
            let r = if res < -residual_tol {
                Region::Negative
            } else if res > residual_tol {
                Region::Positive
            } else {
                boundary.push(g);
                Region::Negative
            };
            region.push(r);
            coeff.push(pinned_coefficient(kind, r));
        }
        let x = DVector::from_fn(m, |i, _| tableau.get(i, border));
        let mut state = PathState {
            problem,
            opts,
            tableau,
            region,
            coeff,
            rho: 0.0,
            x,
            anomalies: Vec::new(),
            residual_tol,
            intercept_tol,
        };
        if !boundary.is_empty() {
            let candidates: Vec<CandidateSpec> = boundary
                .iter()
                .map(|&g| CandidateSpec {
                    g,
                    sides: vec![Region::Negative, Region::Positive],
                })
                .collect();
            state.resolve_configuration(0.0, candidates)?;
        }
        Ok(state)
    }

    /// The problem this state walks.
    pub fn problem(&self) -> &'p QpProblem {
        self.problem
    }

    /// Current penalty level.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Current solution.
    pub fn solution(&self) -> &DVector<f64> {
        &self.x
    }

    /// The partially swept tableau (variables first, then constraints,
    /// then the border column).
    pub fn tableau(&self) -> &SymmetricTableau {
        &self.tableau
    }

    /// Region of global constraint `g`.
    pub fn region(&self, g: usize) -> Region {
        self.region[g]
    }

    /// Current subgradient coefficient of global constraint `g`.
    pub fn coefficient(&self, g: usize) -> f64 {
        self.coeff[g]
    }

    /// Anomalies resolved so far.
    pub fn anomalies(&self) -> &[AnomalyRecord] {
        &self.anomalies
    }

    /// Within-kind index sets of the three regions.
    pub fn index_sets(&self) -> IndexSets {
        let mut sets = IndexSets::default();
        for (g, &r) in self.region.iter().enumerate() {
            let (kind, i) = self.problem.constraint_kind(g);
            let bucket = match (kind, r) {
                (ConstraintKind::Equality, Region::Negative) => &mut sets.negative_eq,
                (ConstraintKind::Equality, Region::Active) => &mut sets.active_eq,
                (ConstraintKind::Equality, Region::Positive) => &mut sets.positive_eq,
                (ConstraintKind::Inequality, Region::Negative) => &mut sets.negative_ineq,
                (ConstraintKind::Inequality, Region::Active) => &mut sets.active_ineq,
                (ConstraintKind::Inequality, Region::Positive) => &mut sets.positive_ineq,
            };
            bucket.push(i);
        }
        sets
    }

    fn view(&self) -> ConfigView<'_> {
        ConfigView {
            m: self.problem.num_vars(),
            tableau: &self.tableau,
            region: &self.region,
            coeff: &self.coeff,
        }
    }

    /// Residual line `intercept + rho * slope` of an inactive constraint,
    /// `None` when `g` is active.
    pub fn residual_line(&self, g: usize) -> Option<(f64, f64)> {
        if self.region[g] == Region::Active {
            None
        } else {
            Some(self.view().constraint_line(g))
        }
    }

    /// Multiplier line `intercept + rho * slope` of an active constraint,
    /// `None` when `g` is inactive. The coefficient at level `rho` is the
    /// line value divided by `rho`.
    pub fn multiplier_line(&self, g: usize) -> Option<(f64, f64)> {
        if self.region[g] == Region::Active {
            Some(self.view().constraint_line(g))
        } else {
            None
        }
    }

    /// Solution line: `x(rho) = base + rho * slope` on the current segment.
    pub fn solution_line(&self) -> (DVector<f64>, DVector<f64>) {
        self.view().solution_line()
    }

    /// `d x / d rho` on the current segment.
    pub fn solution_slope(&self) -> DVector<f64> {
        self.view().solution_line().1
    }

    /// Solution recomputed from tableau blocks at the current level.
    pub fn recomputed_solution(&self) -> DVector<f64> {
        let (base, slope) = self.solution_line();
        base + slope * self.rho
    }

    fn time_tol(&self, rho: f64) -> f64 {
        self.opts.time_tol_factor * (1.0 + rho)
    }

    /// Level at which the residual of inactive constraint `g` reaches
    /// zero, filtered to lie strictly ahead of the current level. `None`
    /// for active constraints, for rates below tolerance, and for times
    /// not ahead.
    pub fn hitting_time(&self, g: usize) -> Option<f64> {
        let t = self.hitting_time_unfiltered(g)?;
        (t > self.rho + self.time_tol(self.rho)).then_some(t)
    }

    /// Unfiltered zero-crossing level of an inactive residual; may lie in
    /// the past. `None` for active constraints or rates below tolerance.
    pub fn hitting_time_unfiltered(&self, g: usize) -> Option<f64> {
        if self.region[g] == Region::Active {
            return None;
        }
        let (intercept, slope) = self.view().constraint_line(g);
        if slope.abs() < self.opts.denominator_tol {
            return None;
        }
        Some(-intercept / slope)
    }

    /// Level at which the coefficient of active constraint `g` reaches the
    /// subdifferential boundary it is moving toward, with the side it
    /// would escape to. `None` for inactive constraints, stationary
    /// coefficients, and times not strictly ahead.
    pub fn escape_time(&self, g: usize) -> Option<(f64, Region)> {
        if self.region[g] != Region::Active {
            return None;
        }
        let (intercept, slope) = self.view().constraint_line(g);
        let (kind, _) = self.problem.constraint_kind(g);
        let (lo, hi) = coefficient_bounds(kind);
        /* coefficient = intercept/rho + slope: decreasing toward `slope`
        when the intercept is positive, increasing when negative */
        let (boundary, to) = if intercept > 0.0 {
            (lo, Region::Negative)
        } else if intercept < 0.0 {
            (hi, Region::Positive)
        } else {
            return None;
        };
        let den = boundary - slope;
        if den.abs() < self.opts.denominator_tol {
            return None;
        }
        let t = intercept / den;
        (t > self.rho + self.time_tol(self.rho)).then_some((t, to))
    }

    /// Coefficients of the active constraints propagated to `rho_new`
    /// along the current segment, as `(global index, value)` pairs.
    pub fn coefficients_at(&self, rho_new: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (g, &r) in self.region.iter().enumerate() {
            if r != Region::Active {
                continue;
            }
            let value = if self.rho > 0.0 && rho_new > 0.0 {
                let (_, slope) = self.view().constraint_line(g);
                let ratio = self.rho / rho_new;
                ratio * self.coeff[g] + (1.0 - ratio) * slope
            } else {
                /* a segment starting at level zero carries constant
                coefficients */
                self.coeff[g]
            };
            out.push((g, value));
        }
        out
    }

    /// Whether the stopping condition holds: every equality active and no
    /// inequality on the positive side, so nothing pushes the solution.
    pub fn is_terminal(&self) -> bool {
        self.region
            .iter()
            .enumerate()
            .all(|(g, &r)| match self.problem.constraint_kind(g).0 {
                ConstraintKind::Equality => r == Region::Active,
                ConstraintKind::Inequality => r != Region::Positive,
            })
    }

    fn config_tols(&self) -> ConfigTols {
        ConfigTols {
            residual: self.residual_tol,
            slope: self.residual_tol,
            coefficient: self.opts.coefficient_tol,
            intercept: self.intercept_tol,
        }
    }

    fn segment_snapshot(&self, rho_end: f64, event: PathEvent) -> PathSegment {
        let (_, slope) = self.solution_line();
        let mut active = Vec::new();
        for (g, &r) in self.region.iter().enumerate() {
            if r != Region::Active {
                continue;
            }
            let (kind, index) = self.problem.constraint_kind(g);
            let (intercept, mslope) = self.view().constraint_line(g);
            active.push(ActiveConstraint {
                kind,
                index,
                coefficient: self.coeff[g],
                multiplier_intercept: intercept,
                multiplier_slope: mslope,
            });
        }
        let df = self.problem.num_vars() - active.len();
        PathSegment {
            rho_start: self.rho,
            rho_end,
            x_start: self.x.clone(),
            slope,
            active,
            event,
            df,
        }
    }

    /// Closes the current segment at its next event and repositions the
    /// state there, or closes the terminal segment if no event lies ahead.
    pub fn advance(mut self) -> Result<Advance<'p>, PathError> {
        if self.is_terminal() {
            return Ok(self.finish());
        }
        let n_c = self.problem.num_constraints();
        let mut times: Vec<(f64, EventCandidate)> = Vec::new();
        for g in 0..n_c {
            if self.region[g] == Region::Active {
                if let Some((t, to)) = self.escape_time(g) {
                    times.push((t, EventCandidate::Escape { g, to }));
                }
            } else if let Some(t) = self.hitting_time(g) {
                times.push((t, EventCandidate::Hit { g }));
            }
        }
        if times.is_empty() {
            /* still-violated constraints with no event ahead cannot happen
            for feasible constraints */
            let violated: Vec<usize> = (0..n_c)
                .filter(|&g| match self.problem.constraint_kind(g).0 {
                    ConstraintKind::Equality => self.region[g] != Region::Active,
                    ConstraintKind::Inequality => self.region[g] == Region::Positive,
                })
                .collect();
            return Err(PathError::Infeasible {
                rho: self.rho,
                violated,
            });
        }
        let rho_next = times.iter().map(|&(t, _)| t).fold(f64::INFINITY, f64::min);
        let group: Vec<EventCandidate> = times
            .iter()
            .filter(|&&(t, _)| t <= rho_next + self.time_tol(rho_next))
            .map(|&(_, c)| c)
            .collect();

        /* snapshot the closing segment before the event mutates the state */
        let mut segment = self.segment_snapshot(rho_next, PathEvent::Terminal);
        let event = if group.len() == 1 {
            match self.apply_single_event(rho_next, group[0])? {
                Some(ev) => ev,
                None => self.escalate(rho_next, &group)?,
            }
        } else {
            self.escalate(rho_next, &group)?
        };
        segment.event = event;
        Ok(Advance::Step {
            segment,
            state: self,
        })
    }

    fn finish(mut self) -> Advance<'p> {
        let segment = self.segment_snapshot(f64::INFINITY, PathEvent::Terminal);
        debug_assert!(
            segment.slope.amax() == 0.0,
            "terminal slope must vanish structurally"
        );
        Advance::Finished {
            segment,
            anomalies: std::mem::take(&mut self.anomalies),
        }
    }

    /// Applies one hit or escape, then validates the new configuration.
    /// Returns `Ok(None)` when validation fails and the caller should fall
    /// back to a configuration search.
    fn apply_single_event(
        &mut self,
        rho_next: f64,
        cand: EventCandidate,
    ) -> Result<Option<PathEvent>, PathError> {
        let snapshot = (
            self.tableau.clone(),
            self.region.clone(),
            self.coeff.clone(),
            self.rho,
            self.x.clone(),
        );
        /* propagate continuing coefficients to the event level on the old
        configuration; continuity makes them valid start values for the new */
        for (g, value) in self.coefficients_at(rho_next) {
            self.coeff[g] = value;
        }
        let m = self.problem.num_vars();
        let applied = match cand {
            EventCandidate::Hit { g } => {
                let r = self.tableau.sweep(m + g);
                if r.is_ok() {
                    self.region[g] = Region::Active;
                    true
                } else {
                    false
                }
            }
            EventCandidate::Escape { g, to } => {
                let r = self.tableau.inverse_sweep(m + g);
                if r.is_ok() {
                    let (kind, _) = self.problem.constraint_kind(g);
                    self.region[g] = to;
                    self.coeff[g] = pinned_coefficient(kind, to);
                    true
                } else {
                    false
                }
            }
        };
        let valid = applied && {
            self.rho = rho_next;
            self.refresh_active_coefficients();
            self.x = self.recomputed_solution();
            config_is_valid(&self.view(), self.problem, self.rho, &self.config_tols())
        };
        if valid {
            let g = cand.constraint();
            let (kind, index) = self.problem.constraint_kind(g);
            let event = match cand {
                EventCandidate::Hit { .. } => PathEvent::Hit { kind, index },
                EventCandidate::Escape { to, .. } => PathEvent::Escape { kind, index, to },
            };
            Ok(Some(event))
        } else {
            let (tableau, region, coeff, rho, x) = snapshot;
            self.tableau = tableau;
            self.region = region;
            self.coeff = coeff;
            self.rho = rho;
            self.x = x;
            Ok(None)
        }
    }

    /// Full configuration search over the event group plus everything
    /// currently sitting on a boundary.
    fn escalate(
        &mut self,
        rho_next: f64,
        group: &[EventCandidate],
    ) -> Result<PathEvent, PathError> {
        let mut candidates: Vec<CandidateSpec> = Vec::new();
        for cand in group {
            let spec = match *cand {
                EventCandidate::Hit { g } => CandidateSpec {
                    /* a hitter that stays inactive bounces back to the side
                    it came from */
                    g,
                    sides: vec![self.region[g]],
                },
                EventCandidate::Escape { g, to } => CandidateSpec { g, sides: vec![to] },
            };
            candidates.push(spec);
        }
        self.resolve_configuration(rho_next, candidates)
    }

    /// Resolves a set of boundary candidates at `rho_event` by
    /// configuration search, repositions the state there, and records the
    /// anomaly. Used at initialization (level zero) and for simultaneous
    /// events.
    fn resolve_configuration(
        &mut self,
        rho_event: f64,
        candidates: Vec<CandidateSpec>,
    ) -> Result<PathEvent, PathError> {
        let search = ConfigSearch {
            problem: self.problem,
            rho: rho_event,
            tols: self.config_tols(),
        };
        /* propagate continuing active coefficients to the event level
        before searching; the evaluator only reads inactive entries, but
        the post-resolution state keeps these values */
        if rho_event > self.rho {
            for (g, value) in self.coefficients_at(rho_event) {
                self.coeff[g] = value;
            }
        }
        let (mut valid, tried) =
            search.run(&self.tableau, &self.region, &self.coeff, &candidates)?;
        let candidate_ids: Vec<usize> = candidates.iter().map(|c| c.g).collect();
        if valid.is_empty() {
            return Err(PathError::NoValidConfiguration {
                rho: rho_event,
                candidates: candidate_ids,
                configurations_tried: tried,
            });
        }
        let equivalent = valid.len();
        let chosen = if valid.len() == 1 {
            valid.pop().unwrap()
        } else {
            /* configurations with identical forward dynamics are the same
            path; keep the one with the fewest active constraints */
            let slope_scale = valid
                .iter()
                .map(|v| v.solution_slope.amax())
                .fold(1.0f64, f64::max);
            let all_same = valid.windows(2).all(|w| {
                (&w[0].solution_slope - &w[1].solution_slope).amax() <= 1e-9 * slope_scale
            });
            if !all_same {
                return Err(PathError::AmbiguousConfiguration {
                    rho: rho_event,
                    candidates: candidate_ids,
                });
            }
            valid
                .into_iter()
                .min_by_key(|v| (v.active_count, v.bits))
                .unwrap()
        };

        /* replay the chosen membership on the real tableau */
        let m = self.problem.num_vars();
        for (i, spec) in candidates.iter().enumerate() {
            let want_active = chosen.bits & (1 << i) != 0;
            let is_active = self.region[spec.g] == Region::Active;
            if want_active != is_active {
                let diag = m + spec.g;
                if self.tableau.is_swept(diag) {
                    self.tableau.inverse_sweep(diag)?;
                } else {
                    self.tableau.sweep(diag)?;
                }
            }
        }
        for &(g, r) in &chosen.regions {
            self.region[g] = r;
            if r != Region::Active {
                let (kind, _) = self.problem.constraint_kind(g);
                self.coeff[g] = pinned_coefficient(kind, r);
            }
        }
        self.rho = rho_event;
        self.refresh_active_coefficients();
        self.x = self.recomputed_solution();
        self.anomalies.push(AnomalyRecord {
            rho: rho_event,
            candidates: candidate_ids,
            configurations_tried: tried,
            resolution: chosen.regions.clone(),
            equivalent_configurations: equivalent,
        });
        let changes = chosen
            .regions
            .iter()
            .map(|&(g, r)| {
                let (kind, index) = self.problem.constraint_kind(g);
                (kind, index, r)
            })
            .collect();
        Ok(PathEvent::Reconfigured { changes })
    }

    /// Re-reads every active coefficient from the tableau at the current
    /// level.
    fn refresh_active_coefficients(&mut self) {
        for g in 0..self.problem.num_constraints() {
            if self.region[g] != Region::Active {
                continue;
            }
            let (intercept, slope) = self.view().constraint_line(g);
            self.coeff[g] = if self.rho > 0.0 {
                intercept / self.rho + slope
            } else {
                slope
            };
        }
    }
}

/// Computes the whole solution path of a problem.
pub fn solve_path(problem: &QpProblem, opts: &PathOptions) -> Result<SolutionPath, PathError> {
    let cap = opts
        .max_segments
        .unwrap_or(50 * problem.num_constraints())
        .max(1);
    let mut state = PathState::initialize(problem, opts.clone())?;
    let mut segments: Vec<PathSegment> = Vec::new();
    loop {
        match state.advance()? {
            Advance::Step { segment, state: s } => {
                segments.push(segment);
                state = s;
                if segments.len() > cap {
                    return Err(PathError::MaxSegmentsExceeded { limit: cap });
                }
            }
            Advance::Finished { segment, anomalies } => {
                let terminal_rho = segment.rho_start;
                let terminal_x = segment.x_start.clone();
                segments.push(segment);
                return Ok(SolutionPath {
                    segments,
                    terminal_x,
                    terminal_rho,
                    anomalies,
                });
            }
        }
    }
}
