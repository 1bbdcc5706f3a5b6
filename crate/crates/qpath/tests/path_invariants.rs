//! Structural invariants of solution paths on randomly generated problems.

use nalgebra::DVector;
use qpath::oracle::{random_problem, solve_constrained_enumeration};
use qpath::path::{
    solve_path, Advance, PathEvent, PathOptions, PathSegment, PathState, SolutionPath,
};
use qpath::problem::{QpProblem, SubgradientCoefficients};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_suite(seed: u64, count: usize, max_eq: usize, max_ineq: usize) -> Vec<QpProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(2..=6);
            let r = rng.random_range(0..=max_eq);
            let s = rng.random_range(0..=max_ineq);
            random_problem(&mut rng, m, r, s)
        })
        .collect()
}

/* A sampling range that covers every junction plus a stretch of the
 * terminal segment, even when the path is a single unconstrained piece. */
fn sample_span(path: &SolutionPath) -> f64 {
    1.2 * path.terminal_rho.max(1.0)
}

/// Penalty coefficients at an interior point of a segment: active rows use
/// their multiplier line, the rest are pinned by the sign of their residual.
/// A residual indistinguishable from zero (a weakly active row riding its
/// boundary) contributes nothing, which is an admissible choice.
fn coefficients_at_point(p: &QpProblem, seg: &PathSegment, rho: f64) -> SubgradientCoefficients {
    let x = seg.solution_at(rho);
    let r = p.num_eq();
    let zero = if p.num_constraints() > 0 {
        1e-9 * (1.0 + p.stacked_rhs().amax())
    } else {
        1e-9
    };
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
            qpath::problem::ConstraintKind::Equality => eq[act.index] = value,
            qpath::problem::ConstraintKind::Inequality => ineq[act.index] = value,
        }
    }
    SubgradientCoefficients {
        equality: eq,
        inequality: ineq,
    }
}

#[test]
fn paths_are_continuous_at_junctions() {
    for p in random_suite(101, 20, 2, 6) {
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        for pair in path.segments.windows(2) {
            let left = pair[0].solution_at(pair[0].rho_end);
            let right = &pair[1].x_start;
            let tol = 1e-8 * (1.0 + right.amax());
            assert!(
                (left - right).amax() <= tol,
                "junction jump at rho {} exceeds {tol}",
                pair[0].rho_end
            );
        }
    }
}

#[test]
fn segments_are_linear_through_their_midpoints() {
    for p in random_suite(211, 20, 2, 6) {
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        for seg in &path.segments {
            if !seg.rho_end.is_finite() {
                continue;
            }
            let mid = 0.5 * (seg.rho_start + seg.rho_end);
            let average = 0.5 * (seg.solution_at(seg.rho_start) + seg.solution_at(seg.rho_end));
            assert!((path.solution_at(mid) - average).amax() <= 1e-10);
        }
    }
}

#[test]
fn sampled_path_points_are_stationary() {
    for p in random_suite(307, 10, 2, 6) {
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let span = sample_span(&path);
        for k in 0..50 {
            let rho = span * (k as f64 + 0.5) / 50.0;
            let seg = path.segment_at(rho);
            let x = seg.solution_at(rho);
            let coeffs = coefficients_at_point(&p, seg, rho);
            let grad = p
                .stationarity_residual(&x, rho, &coeffs, 1e-6)
                .expect("recovered coefficients must be admissible");
            let scale = 1.0 + p.linear().amax() + rho;
            assert!(
                grad.amax() <= 1e-7 * scale,
                "stationarity gap {} at rho {rho}",
                grad.amax()
            );
        }
    }
}

#[test]
fn sampled_path_points_beat_random_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(409);
    for p in random_suite(401, 5, 2, 6) {
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let span = sample_span(&path);
        for k in 0..5 {
            let rho = span * (k as f64 + 0.5) / 5.0;
            let x = path.solution_at(rho);
            let base = p.penalized_objective(&x, rho);
            for trial in 0..100 {
                let step = if trial % 2 == 0 { 0.05 } else { 0.001 };
                let z = &x
                    + DVector::from_fn(x.len(), |_, _| {
                        let draw: f64 = StandardNormal.sample(&mut rng);
                        step * draw
                    });
                assert!(base <= p.penalized_objective(&z, rho) + 1e-7);
            }
        }
    }
}

#[test]
fn terminal_points_are_feasible_and_optimal() {
    for p in random_suite(503, 20, 2, 6) {
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let x = &path.terminal_x;
        for i in 0..p.num_eq() {
            assert!(p.constraint_residual(i, x).abs() <= 1e-8);
        }
        for j in 0..p.num_ineq() {
            assert!(p.constraint_residual(p.num_eq() + j, x) <= 1e-8);
        }
        let oracle = solve_constrained_enumeration(&p).unwrap();
        assert!(
            (x - &oracle.x).amax() <= 1e-6,
            "terminal point differs from enumeration by {}",
            (x - &oracle.x).amax()
        );
    }
}

#[test]
fn df_moves_by_one_at_simple_events() {
    for p in random_suite(607, 20, 2, 6) {
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        for seg in &path.segments {
            assert_eq!(seg.df, p.num_vars() - seg.active.len());
        }
        for pair in path.segments.windows(2) {
            match pair[0].event {
                PathEvent::Hit { .. } => assert_eq!(pair[1].df + 1, pair[0].df),
                PathEvent::Escape { .. } => assert_eq!(pair[1].df, pair[0].df + 1),
                PathEvent::Reconfigured { .. } => {}
                PathEvent::Terminal => panic!("terminal event on an interior segment"),
            }
        }
    }
}

#[test]
fn states_recompute_their_solution_from_the_tableau() {
    for p in random_suite(701, 5, 2, 6) {
        let mut state = PathState::initialize(&p, PathOptions::default()).unwrap();
        loop {
            let scale = 1.0 + state.solution().amax();
            assert!((state.recomputed_solution() - state.solution()).amax() <= 1e-9 * scale);
            match state.advance().unwrap() {
                Advance::Step { state: next, .. } => state = next,
                Advance::Finished { .. } => break,
            }
        }
    }
}

#[test]
fn anomalous_starts_resolve_to_stationary_paths() {
    /* a constraint that already holds with equality at the smooth minimum
     * forces the configuration search to run at level zero */
    let mut rng = ChaCha8Rng::seed_from_u64(811);
    for _ in 0..5 {
        let p0 = random_problem(&mut rng, 3, 0, 2);
        let x0 = p0
            .quadratic()
            .clone()
            .cholesky()
            .unwrap()
            .solve(&(-p0.linear()));
        let extra = DVector::from_fn(3, |i, _| if i == 0 { 1.0 } else { 0.5 });
        let s0 = p0.num_ineq();
        let mut w = nalgebra::DMatrix::zeros(s0 + 1, 3);
        w.rows_mut(0, s0).copy_from(p0.inequality_matrix());
        w.row_mut(s0).copy_from(&extra.transpose());
        let mut e = DVector::zeros(s0 + 1);
        e.rows_mut(0, s0).copy_from(p0.inequality_rhs());
        e[s0] = extra.dot(&x0);
        let p = QpProblem::new(
            p0.quadratic().clone(),
            p0.linear().clone(),
            0.0,
            p0.equality_matrix().clone(),
            p0.equality_rhs().clone(),
            w,
            e,
        )
        .unwrap();
        let path = solve_path(&p, &PathOptions::default()).unwrap();
        let rho = 1e-4;
        let seg = path.segment_at(rho);
        let coeffs = coefficients_at_point(&p, seg, rho);
        let grad = p
            .stationarity_residual(&seg.solution_at(rho), rho, &coeffs, 1e-6)
            .unwrap();
        assert!(grad.amax() <= 1e-7 * (1.0 + p.linear().amax() + rho));
    }
}
