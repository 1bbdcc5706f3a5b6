//! Release gate: one test per shipping criterion, each printing a single
//! PASS/FAIL line. Tolerances are pinned here and nowhere else.

use std::time::Instant;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use qpath::oracle::{
    minimize_penalized_grid, pava_isotone, random_least_squares_problem, random_problem,
    random_spd_matrix, solve_constrained_enumeration,
};
use qpath::path::{
    build_initial_tableau, solve_path, PathEvent, PathOptions, PathSegment, PathState, SolutionPath,
};
use qpath::problem::{ConstraintKind, QpProblem, SubgradientCoefficients};
use qpath::selection::diagnostics;
use qpath::shape::{weighted_mean_fit_problem, ShapeKind, ShapeSpec};
use qpath::sweep::{full_sweep_inverse, SymmetricTableau};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(number: u32, label: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {number} ({label}): {verdict}{detail}");
    assert!(ok, "acceptance {number} ({label}) failed{detail}");
}

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

fn fish_response() -> DVector<f64> {
    dvector![0.3752, 0.3202, 0.2775, 0.3043, 0.5327]
}

fn concave_replica() -> (QpProblem, DVector<f64>) {
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let xs = DVector::from_fn(n, |i, _| (i as f64 + 0.5) / n as f64);
    let y = DVector::from_fn(n, |i, _| {
        let noise: f64 = StandardNormal.sample(&mut rng);
        4.0 * xs[i] * (1.0 - xs[i]) + 0.3 * noise
    });
    let spec = ShapeSpec::new(ShapeKind::Concave).with_knots(xs.iter().copied().collect());
    let p = weighted_mean_fit_problem(&y, &DVector::from_element(n, 1.0), &spec).unwrap();
    (p, y)
}

/// Penalty coefficients witnessing stationarity at an interior path point.
fn coefficients_at_point(p: &QpProblem, seg: &PathSegment, rho: f64) -> SubgradientCoefficients {
    let x = seg.solution_at(rho);
    let r = p.num_eq();
    let zero = 1e-9
        * (1.0
            + if p.num_constraints() > 0 {
                p.stacked_rhs().amax()
            } else {
                0.0
            });
    let mut eq = DVector::zeros(r);
    for i in 0..r {
        let res = p.constraint_residual(i, &x);
        eq[i] = if res < -zero {
            -1.0
        } else if res > zero {
            1.0
        } else {
            0.0
        };
    }
    let mut ineq = DVector::zeros(p.num_ineq());
    for j in 0..p.num_ineq() {
        ineq[j] = if p.constraint_residual(r + j, &x) > zero {
            1.0
        } else {
            0.0
        };
    }
    for act in &seg.active {
        let value = act.coefficient_at(rho);
        match act.kind {
            ConstraintKind::Equality => eq[act.index] = value,
            ConstraintKind::Inequality => ineq[act.index] = value,
        }
    }
    SubgradientCoefficients {
        equality: eq,
        inequality: ineq,
    }
}

#[test]
fn criterion_1_toy_curve_path() {
    let p = toy_problem();
    let started = Instant::now();
    let path = solve_path(&p, &PathOptions::default()).unwrap();
    let elapsed = started.elapsed();

    let state = PathState::initialize(&p, PathOptions::default()).unwrap();
    let x0 = state.solution().clone();
    let times = [
        state.hitting_time_unfiltered(0),
        state.hitting_time_unfiltered(1),
        state.hitting_time_unfiltered(2),
    ];

    let mut ok = true;
    ok &= (x0[0] - 0.0835).abs() <= 1e-3 && (x0[1] - 1.3004).abs() <= 1e-3;
    let expected_times = [-0.0599, 0.4051, 0.2116];
    for (got, want) in times.iter().zip(expected_times) {
        ok &= matches!(got, Some(t) if (t - want).abs() <= 1e-3);
    }
    ok &= (path.segments[0].rho_end - 0.2116).abs() <= 1e-3;
    ok &= (path.terminal_x[0] - 0.3787).abs() <= 1e-3;
    ok &= (path.terminal_x[1] - 0.6213).abs() <= 1e-3;
    ok &= path.segments.len() == 2;
    ok &= elapsed.as_millis() < 10;
    report(
        1,
        "toy curve-fit path",
        ok,
        &format!(" ({} segments in {:?})", path.segments.len(), elapsed),
    );
}

#[test]
fn criterion_2_swept_tableau_entries() {
    let p = toy_problem();
    let mut tab = build_initial_tableau(&p);
    tab.sweep(0).unwrap();
    tab.sweep(1).unwrap();
    let expected: [&[f64]; 6] = [
        &[1.9794],
        &[-3.3745, 6.5844],
        &[-1.9794, 3.3745, 1.9794],
        &[3.3745, -6.5844, -3.3745, 6.5844],
        &[-1.3951, 3.2099, 1.3951, -3.2099, 1.8148],
        &[0.0835, 1.3004, -0.0835, -1.3004, 0.3840, 2.5068],
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (i, row) in expected.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            let gap = (tab.get(i, j) - want).abs();
            worst = worst.max(gap);
            ok &= gap <= 1e-4;
        }
    }
    report(
        2,
        "swept tableau, all 21 entries",
        ok,
        &format!(" (worst entry gap {worst:.2e})"),
    );
}

#[test]
fn criterion_3_isotone_fish_fit() {
    let y = fish_response();
    let weights = DVector::from_element(5, 1.0);
    let p = weighted_mean_fit_problem(&y, &weights, &ShapeSpec::new(ShapeKind::Isotone)).unwrap();
    let path = solve_path(&p, &PathOptions::default()).unwrap();
    let pooled = pava_isotone(&y, &weights);

    let mut ok = true;
    ok &= (&path.terminal_x - &pooled).amax() <= 1e-8;
    for i in 0..4 {
        for j in (i + 1)..4 {
            ok &= (path.terminal_x[i] - path.terminal_x[j]).abs() < 1e-8;
        }
    }
    let span = 1.2 * path.terminal_rho.max(1.0);
    let mut worst_grad: f64 = 0.0;
    for k in 0..20 {
        let rho = span * (k as f64 + 0.5) / 20.0;
        let seg = path.segment_at(rho);
        let coeffs = coefficients_at_point(&p, seg, rho);
        match p.stationarity_residual(&seg.solution_at(rho), rho, &coeffs, 1e-6) {
            Ok(grad) => {
                worst_grad = worst_grad.max(grad.amax());
                ok &= grad.amax() <= 1e-7 * (1.0 + p.linear().amax() + rho);
            }
            Err(_) => ok = false,
        }
    }
    report(
        3,
        "isotone fish fit equals pooling",
        ok,
        &format!(" (worst stationarity gap {worst_grad:.2e})"),
    );
}

#[test]
fn criterion_4_reference_solver_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ok = true;
    let mut worst_terminal: f64 = 0.0;
    let mut worst_eval: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(2..=6);
        let r = rng.random_range(0..=2usize.min(m - 1));
        let s = rng.random_range(0..=8);
        let p = random_problem(&mut rng, m, r, s);
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let oracle = solve_constrained_enumeration(&p).unwrap();
        let gap = (&path.terminal_x - &oracle.x).amax();
        worst_terminal = worst_terminal.max(gap);
        ok &= gap <= 1e-6;

        let span = 1.5 * path.terminal_rho.max(1.0);
        for _ in 0..3 {
            let rho = rng.random_range(0.0..span);
            let direct = minimize_penalized_grid(&p, rho, &DVector::zeros(m)).unwrap();
            let gap = (path.solution_at(rho) - direct).amax();
            worst_eval = worst_eval.max(gap);
            ok &= gap <= 1e-5;
        }
    }
    let elapsed = started.elapsed();
    ok &= elapsed.as_secs() < 30;
    report(
        4,
        "path vs reference solvers on 50 random problems",
        ok,
        &format!(" (worst terminal gap {worst_terminal:.2e}, worst pointwise gap {worst_eval:.2e}, {elapsed:?})"),
    );
}

#[test]
fn criterion_5_sweep_kernel_properties() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut ok = true;
    for _ in 0..100 {
        let dim = rng.random_range(1..=12);
        let a = random_spd_matrix(&mut rng, dim);

        let inv = full_sweep_inverse(&a).unwrap();
        ok &= (&a * &inv - DMatrix::<f64>::identity(dim, dim)).amax() <= 1e-8 * dim as f64;

        let tab = SymmetricTableau::from_matrix(&(-&a)).unwrap();
        let mut round_trip = tab.clone();
        let k = rng.random_range(0..dim);
        round_trip.sweep(k).unwrap();
        round_trip.inverse_sweep(k).unwrap();
        let mut forward = tab.clone();
        let mut backward = tab.clone();
        for k in 0..dim {
            forward.sweep(k).unwrap();
        }
        for k in (0..dim).rev() {
            backward.sweep(k).unwrap();
        }
        for i in 0..dim {
            for j in 0..=i {
                let original = tab.get(i, j);
                ok &= (round_trip.get(i, j) - original).abs() <= 1e-10 * (1.0 + original.abs());
                let fwd = forward.get(i, j);
                ok &= (backward.get(i, j) - fwd).abs() <= 1e-10 * (1.0 + fwd.abs());
            }
        }
    }
    let elapsed = started.elapsed();
    ok &= elapsed.as_secs() < 5;
    report(
        5,
        "sweep kernel on 100 random matrices",
        ok,
        &format!(" ({elapsed:?})"),
    );
}

fn structure_ok(p: &QpProblem, path: &SolutionPath) -> (bool, f64) {
    let mut ok = true;
    let mut worst_junction: f64 = 0.0;
    for pair in path.segments.windows(2) {
        let left = pair[0].solution_at(pair[0].rho_end);
        let gap = (&left - &pair[1].x_start).amax();
        worst_junction = worst_junction.max(gap);
        ok &= gap <= 1e-8 * (1.0 + pair[1].x_start.amax());
        match pair[0].event {
            PathEvent::Hit { .. } => ok &= pair[1].df + 1 == pair[0].df,
            PathEvent::Escape { .. } => ok &= pair[1].df == pair[0].df + 1,
            PathEvent::Reconfigured { .. } => {}
            PathEvent::Terminal => ok = false,
        }
    }
    for seg in &path.segments {
        if seg.rho_end.is_finite() {
            let mid = 0.5 * (seg.rho_start + seg.rho_end);
            let average = 0.5 * (seg.solution_at(seg.rho_start) + seg.solution_at(seg.rho_end));
            ok &= (path.solution_at(mid) - average).amax() <= 1e-10;
        }
    }
    for i in 0..p.num_eq() {
        ok &= p.constraint_residual(i, &path.terminal_x).abs() <= 1e-8;
    }
    for j in 0..p.num_ineq() {
        ok &= p.constraint_residual(p.num_eq() + j, &path.terminal_x) <= 1e-8;
    }
    (ok, worst_junction)
}

#[test]
fn criterion_6_path_structure() {
    let mut ok = true;
    let mut worst: f64 = 0.0;

    let fish = weighted_mean_fit_problem(
        &fish_response(),
        &DVector::from_element(5, 1.0),
        &ShapeSpec::new(ShapeKind::Isotone),
    )
    .unwrap();
    let (concave, _) = concave_replica();
    let fixtures = vec![toy_problem(), fish, concave];
    for p in &fixtures {
        let path = solve_path(p, &PathOptions::default()).unwrap();
        let (fine, gap) = structure_ok(p, &path);
        ok &= fine;
        worst = worst.max(gap);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..20 {
        let m = rng.random_range(2..=6);
        let r = rng.random_range(0..=2usize.min(m - 1));
        let s = rng.random_range(0..=6);
        let p = random_problem(&mut rng, m, r, s);
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let (fine, gap) = structure_ok(&p, &path);
        ok &= fine;
        worst = worst.max(gap);
    }
    report(
        6,
        "path structure on fixtures and 20 random problems",
        ok,
        &format!(" (worst junction gap {worst:.2e})"),
    );
}

#[test]
fn criterion_7_concave_regression_replica() {
    let (p, _) = concave_replica();
    let started = Instant::now();
    let path = solve_path(&p, &PathOptions::default()).unwrap();
    let elapsed = started.elapsed();

    let mut ok = true;
    ok &= elapsed.as_secs() < 2;
    ok &= path.segments.len() < 5000;
    for j in 0..p.num_ineq() {
        ok &= p.constraint_residual(j, &path.terminal_x) <= 1e-8;
    }
    let span = 1.2 * path.terminal_rho.max(1.0);
    let grid: Vec<f64> = (0..40).map(|k| span * k as f64 / 39.0).collect();
    let diag = diagnostics(&p, &path, &grid, Some(0.09)).unwrap();
    ok &= diag.points.iter().all(|pt| pt.cp.is_finite());
    ok &= path.segments[0].df == 100;
    let terminal_df = path.segments.last().unwrap().df;
    ok &= terminal_df < 100;
    report(
        7,
        "concave regression with 100 points",
        ok,
        &format!(
            " ({} segments, terminal model size {terminal_df}, {elapsed:?})",
            path.segments.len()
        ),
    );
}

#[test]
fn criterion_8_model_size_trace_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.random_range(2..=5);
        let n = rng.random_range((m + 3)..=14);
        let r = rng.random_range(0..=1);
        let s = rng.random_range(1..=5);
        let p = random_least_squares_problem(&mut rng, n, m, r, s);
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let design = &p.least_squares().unwrap().design;
        let picks = [0usize, path.segments.len() / 2, path.segments.len() - 1];
        for &idx in &picks {
            let seg = &path.segments[idx];
            let k = seg.active.len();
            let mut kkt = DMatrix::<f64>::zeros(m + k, m + k);
            kkt.view_mut((0, 0), (m, m)).copy_from(p.quadratic());
            for (row, act) in seg.active.iter().enumerate() {
                let g = match act.kind {
                    ConstraintKind::Equality => act.index,
                    ConstraintKind::Inequality => p.num_eq() + act.index,
                };
                let (coeffs, _) = p.constraint_row(g);
                for col in 0..m {
                    kkt[(m + row, col)] = coeffs[col];
                    kkt[(col, m + row)] = coeffs[col];
                }
            }
            let inv = kkt.try_inverse().unwrap();
            let sens = inv.view((0, 0), (m, m)).into_owned();
            let trace = (design * sens * design.transpose()).trace();
            let gap = (trace - seg.df as f64).abs();
            worst = worst.max(gap);
            ok &= gap <= 1e-8;
        }
    }
    report(
        8,
        "fitted-value trace equals model size",
        ok,
        &format!(" (worst gap {worst:.2e})"),
    );
}
