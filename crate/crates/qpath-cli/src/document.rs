//! Problem ingestion and path export for the command line.
//!
//! Input documents are JSON with field names matching the mathematical
//! objects (`A`, `b`, `c` for an explicit quadratic; `X`, `y`, `weights`
//! for a regression fit; `V`/`d` and `W`/`e` for explicit constraints or a
//! `shape` request instead). Output documents carry every affine segment in
//! full, so a reader can reconstruct the solution at any penalty level
//! without re-solving.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use qpath::shape::{ShapeError, ShapeKind, ShapeSpec};
use qpath::{
    ActiveConstraint, AnomalyRecord, ConstraintKind, PathEvent, PathOptions, ProblemError,
    QpProblem, Region, SolutionPath,
};

/// Errors surfaced to the user, split by exit code: `Invalid` covers
/// unreadable or inconsistent input (exit 1), `Solver` covers problems that
/// were well formed but rejected by the engine (exit 2).
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Solver(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(msg) | CliError::Solver(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

/* ---------------------------------------------------------------- input */

/// The on-disk problem description. Exactly one smooth family (explicit
/// quadratic or regression data) and exactly one constraint source
/// (explicit rows or a shape request) must be present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
    pub c: Option<f64>,
    #[serde(rename = "X")]
    pub x: Option<Vec<Vec<f64>>>,
    pub y: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Option<Vec<Vec<f64>>>,
    pub d: Option<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Option<Vec<Vec<f64>>>,
    pub e: Option<Vec<f64>>,
    pub shape: Option<ShapeDocument>,
    #[serde(default)]
    pub options: RunOptions,
}

/// Declarative constraint request: a family name plus whatever auxiliary
/// data the family needs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeDocument {
    pub kind: String,
    pub knots: Option<Vec<f64>>,
    pub grid_shape: Option<[usize; 2]>,
    pub nonneg_corner: Option<bool>,
    pub sum_bound: Option<f64>,
}

/// Run-level options carried inside the document; command line flags take
/// precedence over these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    pub sigma2: Option<f64>,
    pub rho_grid: Option<Vec<f64>>,
    pub max_segments: Option<usize>,
    #[serde(default)]
    pub tolerances: ToleranceOptions,
}

/// Optional tolerance overrides; anything omitted keeps the default.
#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOptions {
    pub residual: Option<f64>,
    pub time: Option<f64>,
    pub pivot: Option<f64>,
}

/// A validated document, converted into solver inputs.
pub struct BuiltProblem {
    pub problem: QpProblem,
    pub sigma2: Option<f64>,
    pub rho_grid: Option<Vec<f64>>,
    pub max_segments: Option<usize>,
    pub tolerances: ToleranceOptions,
}

impl ProblemDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|err| CliError::Invalid(format!("document parse error: {err}")))
    }

    /// Checks the family/constraint-source exclusivity rules, converts the
    /// nested arrays, and assembles the problem.
    pub fn build(self) -> Result<BuiltProblem, CliError> {
        let has_quadratic = self.a.is_some() || self.b.is_some() || self.c.is_some();
        let has_regression = self.x.is_some() || self.y.is_some() || self.weights.is_some();
        if has_quadratic && has_regression {
            return Err(CliError::Invalid(
                "give either the quadratic fields A/b/c or the regression fields X/y/weights, \
                 not both"
                    .into(),
            ));
        }
        if !has_quadratic && !has_regression {
            return Err(CliError::Invalid(
                "no objective: expected A and b, or y (with optional X and weights)".into(),
            ));
        }

        enum Smooth {
            Quadratic(DMatrix<f64>, DVector<f64>, f64),
            Regression(DMatrix<f64>, DVector<f64>, Option<DVector<f64>>),
        }

        let (smooth, m) = if has_quadratic {
            let a = matrix("A", self.a.as_deref().ok_or_missing("A")?)?;
            let b = vector(self.b.ok_or_missing("b")?);
            let c = self.c.unwrap_or(0.0);
            let m = a.ncols();
            (Smooth::Quadratic(a, b, c), m)
        } else {
            let y = vector(self.y.ok_or_missing("y")?);
            let n = y.len();
            /* With no design matrix the coordinates themselves are fit,
            which is an identity design. */
            let x = match self.x.as_deref() {
                Some(rows) => matrix("X", rows)?,
                None => DMatrix::identity(n, n),
            };
            let weights = self.weights.map(vector);
            let m = x.ncols();
            (Smooth::Regression(x, y, weights), m)
        };

        let has_explicit =
            self.v.is_some() || self.d.is_some() || self.w.is_some() || self.e.is_some();
        let has_shape = self.shape.is_some();
        if has_explicit && has_shape {
            return Err(CliError::Invalid(
                "give either explicit constraint rows (V/d, W/e) or a shape, not both".into(),
            ));
        }
        if !has_explicit && !has_shape {
            return Err(CliError::Invalid(
                "no constraints: give V/d, W/e, or a shape".into(),
            ));
        }

        let (v, d, w, e, allow_dependent) = if has_explicit {
            if self.v.is_some() != self.d.is_some() {
                return Err(CliError::Invalid("V and d must appear together".into()));
            }
            if self.w.is_some() != self.e.is_some() {
                return Err(CliError::Invalid("W and e must appear together".into()));
            }
            let (v, d) = match (self.v.as_deref(), self.d) {
                (Some(rows), Some(rhs)) => (matrix_with_cols("V", rows, m)?, vector(rhs)),
                _ => (DMatrix::zeros(0, m), DVector::zeros(0)),
            };
            let (w, e) = match (self.w.as_deref(), self.e) {
                (Some(rows), Some(rhs)) => (matrix_with_cols("W", rows, m)?, vector(rhs)),
                _ => (DMatrix::zeros(0, m), DVector::zeros(0)),
            };
            (v, d, w, e, false)
        } else {
            let spec = shape_spec(self.shape.as_ref().unwrap())?;
            let (w, e) = spec
                .build(m)
                .map_err(|err: ShapeError| CliError::Invalid(err.to_string()))?;
            let allow = spec.allows_dependent_rows();
            (DMatrix::zeros(0, m), DVector::zeros(0), w, e, allow)
        };

        let problem = match smooth {
            Smooth::Quadratic(a, b, c) => {
                if allow_dependent {
                    QpProblem::new_allowing_dependent_rows(a, b, c, v, d, w, e)
                } else {
                    QpProblem::new(a, b, c, v, d, w, e)
                }
            }
            Smooth::Regression(x, y, weights) => {
                if allow_dependent {
                    QpProblem::from_least_squares_allowing_dependent_rows(x, y, weights, v, d, w, e)
                } else {
                    QpProblem::from_least_squares(x, y, weights, v, d, w, e)
                }
            }
        }
        .map_err(problem_error)?;

        Ok(BuiltProblem {
            problem,
            sigma2: self.options.sigma2,
            rho_grid: self.options.rho_grid,
            max_segments: self.options.max_segments,
            tolerances: self.options.tolerances,
        })
    }
}

/* Definiteness is a property of the optimization problem, not of the file
format, so its failure is reported as a solver rejection. */
fn problem_error(err: ProblemError) -> CliError {
    match err {
        ProblemError::NotPositiveDefinite { .. } => CliError::Solver(err.to_string()),
        _ => CliError::Invalid(err.to_string()),
    }
}

trait OrMissing<T> {
    fn ok_or_missing(self, name: &str) -> Result<T, CliError>;
}

impl<T> OrMissing<T> for Option<T> {
    fn ok_or_missing(self, name: &str) -> Result<T, CliError> {
        self.ok_or_else(|| CliError::Invalid(format!("missing required field {name}")))
    }
}

fn vector(values: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(values)
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    matrix_with_cols(name, rows, ncols)
}

fn matrix_with_cols(name: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, CliError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::Invalid(format!(
                "row {i} of {name} has {} entries, expected {ncols}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn shape_spec(doc: &ShapeDocument) -> Result<ShapeSpec, CliError> {
    let kind = match doc.kind.as_str() {
        "isotone" => ShapeKind::Isotone,
        "antitone" => ShapeKind::Antitone,
        "concave" => ShapeKind::Concave,
        "convex" => ShapeKind::Convex,
        "nonnegative" => ShapeKind::Nonnegative,
        "matrix_partial_order" => ShapeKind::MatrixPartialOrder,
        "bound_sum" => ShapeKind::BoundSum,
        other => {
            return Err(CliError::Invalid(format!(
                "unknown shape kind {other:?}; expected one of isotone, antitone, concave, \
                 convex, nonnegative, matrix_partial_order, bound_sum"
            )))
        }
    };
    let mut spec = ShapeSpec::new(kind);
    if let Some(knots) = &doc.knots {
        spec = spec.with_knots(knots.clone());
    }
    if let Some([rows, cols]) = doc.grid_shape {
        spec = spec.with_grid(rows, cols);
    }
    if let Some(corner) = doc.nonneg_corner {
        spec.nonneg_corner = corner;
    }
    if let Some(bound) = doc.sum_bound {
        spec.sum_bound = bound;
    }
    Ok(spec)
}

/* --------------------------------------------------------------- output */

/// Serialized solution path: the effective tolerances of the run, every
/// segment with its affine data, the terminal solution, and any boundary
/// anomalies the engine resolved.
#[derive(Debug, Serialize, Deserialize)]
pub struct PathDocument {
    pub tolerances: ToleranceEcho,
    pub segments: Vec<SegmentDocument>,
    pub terminal_rho: f64,
    pub terminal_x: Vec<f64>,
    pub anomalies: Vec<AnomalyDocument>,
}

/// The tolerance factors a run actually used, echoed for reproducibility.
#[derive(Debug, Serialize, Deserialize)]
pub struct ToleranceEcho {
    pub residual: f64,
    pub time: f64,
    pub denominator: f64,
    pub pivot: f64,
    pub coefficient: f64,
}

/// One maximal interval of constant configuration. The solution inside is
/// `x_start + (rho - rho_start) * slope`; `rho_end` is null on the
/// unbounded terminal segment.
#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentDocument {
    pub rho_start: f64,
    pub rho_end: Option<f64>,
    pub x_start: Vec<f64>,
    pub slope: Vec<f64>,
    pub active: Vec<ActiveDocument>,
    pub event: EventDocument,
    pub df: usize,
}

/// An active constraint with its multiplier line
/// `lambda(rho) = multiplier_intercept + rho * multiplier_slope`;
/// `coefficient` is the subgradient coefficient at the segment start.
#[derive(Debug, Serialize, Deserialize)]
pub struct ActiveDocument {
    pub kind: String,
    pub index: usize,
    pub coefficient: f64,
    pub multiplier_intercept: f64,
    pub multiplier_slope: f64,
}

/// What ended a segment.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventDocument {
    Hit {
        kind: String,
        index: usize,
    },
    Escape {
        kind: String,
        index: usize,
        to: String,
    },
    Reconfigured {
        changes: Vec<ChangeDocument>,
    },
    Terminal,
}

/// One constraint's new region after a multi-constraint event.
#[derive(Debug, Serialize, Deserialize)]
pub struct ChangeDocument {
    pub kind: String,
    pub index: usize,
    pub region: String,
}

/// A resolved boundary anomaly: which candidates coincided, how many
/// assignments were tried, and the accepted region per candidate
/// (by global constraint index).
#[derive(Debug, Serialize, Deserialize)]
pub struct AnomalyDocument {
    pub rho: f64,
    pub candidates: Vec<usize>,
    pub configurations_tried: usize,
    pub resolution: Vec<ResolutionDocument>,
    pub equivalent_configurations: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolutionDocument {
    pub constraint: usize,
    pub region: String,
}

/// Point evaluation: the solution and the active set at one penalty level.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalDocument {
    pub rho: f64,
    pub x: Vec<f64>,
    pub active: Vec<ActiveAtDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ActiveAtDocument {
    pub kind: String,
    pub index: usize,
    pub coefficient: f64,
}

fn kind_label(kind: ConstraintKind) -> String {
    match kind {
        ConstraintKind::Equality => "equality".into(),
        ConstraintKind::Inequality => "inequality".into(),
    }
}

fn region_label(region: Region) -> String {
    match region {
        Region::Negative => "negative".into(),
        Region::Active => "active".into(),
        Region::Positive => "positive".into(),
    }
}

fn active_document(act: &ActiveConstraint) -> ActiveDocument {
    ActiveDocument {
        kind: kind_label(act.kind),
        index: act.index,
        coefficient: act.coefficient,
        multiplier_intercept: act.multiplier_intercept,
        multiplier_slope: act.multiplier_slope,
    }
}

fn event_document(event: &PathEvent) -> EventDocument {
    match event {
        PathEvent::Hit { kind, index } => EventDocument::Hit {
            kind: kind_label(*kind),
            index: *index,
        },
        PathEvent::Escape { kind, index, to } => EventDocument::Escape {
            kind: kind_label(*kind),
            index: *index,
            to: region_label(*to),
        },
        PathEvent::Reconfigured { changes } => EventDocument::Reconfigured {
            changes: changes
                .iter()
                .map(|(kind, index, region)| ChangeDocument {
                    kind: kind_label(*kind),
                    index: *index,
                    region: region_label(*region),
                })
                .collect(),
        },
        PathEvent::Terminal => EventDocument::Terminal,
    }
}

fn anomaly_document(record: &AnomalyRecord) -> AnomalyDocument {
    AnomalyDocument {
        rho: record.rho,
        candidates: record.candidates.clone(),
        configurations_tried: record.configurations_tried,
        resolution: record
            .resolution
            .iter()
            .map(|&(constraint, region)| ResolutionDocument {
                constraint,
                region: region_label(region),
            })
            .collect(),
        equivalent_configurations: record.equivalent_configurations,
    }
}

pub fn path_document(path: &SolutionPath, options: &PathOptions) -> PathDocument {
    PathDocument {
        tolerances: ToleranceEcho {
            residual: options.residual_tol_factor,
            time: options.time_tol_factor,
            denominator: options.denominator_tol,
            pivot: options.pivot_tol_factor,
            coefficient: options.coefficient_tol,
        },
        segments: path
            .segments
            .iter()
            .map(|seg| SegmentDocument {
                rho_start: seg.rho_start,
                rho_end: seg.rho_end.is_finite().then_some(seg.rho_end),
                x_start: seg.x_start.iter().copied().collect(),
                slope: seg.slope.iter().copied().collect(),
                active: seg.active.iter().map(active_document).collect(),
                event: event_document(&seg.event),
                df: seg.df,
            })
            .collect(),
        terminal_rho: path.terminal_rho,
        terminal_x: path.terminal_x.iter().copied().collect(),
        anomalies: path.anomalies.iter().map(anomaly_document).collect(),
    }
}

pub fn eval_document(path: &SolutionPath, rho: f64) -> EvalDocument {
    let segment = path.segment_at(rho);
    /* Past the terminal breakpoint the active set stops changing, so the
    terminal segment's data is evaluated at its own start. */
    let level = rho.min(segment.rho_end).max(segment.rho_start);
    EvalDocument {
        rho,
        x: path.solution_at(rho).iter().copied().collect(),
        active: segment
            .active
            .iter()
            .map(|act| ActiveAtDocument {
                kind: kind_label(act.kind),
                index: act.index,
                coefficient: act.coefficient_at(level),
            })
            .collect(),
    }
}
