mod common;

use common::{canonical_tv, instance, ols, rng, Shape};
use proptest::prelude::*;
use pwl_oracle::{grid_bp_oracle, GridSpec};
use rand::Rng;
use sparse_pwl::{
    admm_solve, analyze_saturations, canonical_certificate, canonical_interpolant, connect, envelope,
    envelope_contains, fit, kkt_residual, lambda_max, second_difference_matrix, sparsest_solution,
    verify_solution, FitOptions, RunChoice, RunChoices, SampleSet, SolverOptions,
};

fn samples(x: &[f64], y: &[f64]) -> SampleSet {
    SampleSet::new(x.to_vec(), y.to_vec()).unwrap()
}

fn sorted_x() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, 3..40).prop_map(|gaps| {
        let mut x = vec![0.0];
        for g in gaps {
            x.push(x.last().unwrap() + g);
        }
        x
    })
}

proptest! {
    #[test]
    fn second_differences_annihilate_affine(x in sorted_x(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let l = second_difference_matrix(&x).unwrap();
        let z: Vec<f64> = x.iter().map(|t| a + b * t).collect();
        let scale = 1.0 + b.abs() * x.last().unwrap() / 0.05;
        prop_assert!(l.apply(&z).iter().all(|v| v.abs() <= 1e-12 * scale));
    }

    #[test]
    fn curvature_norm_is_tv_of_connecting_spline(x in sorted_x(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let z: Vec<f64> = x.iter().map(|_| r.random_range(-2.0..2.0)).collect();
        let l = second_difference_matrix(&x).unwrap();
        let norm: f64 = l.apply(&z).iter().map(|v| v.abs()).sum();
        let points: Vec<(f64, f64)> = x.iter().copied().zip(z.iter().copied()).collect();
        let tv = connect(&points).unwrap().tv_norm();
        prop_assert!((norm - tv).abs() <= 1e-10 * (1.0 + norm));
    }
}

#[test]
fn grid_bp_never_beats_canonical() {
    let mut r = rng(21);
    for _ in 0..30 {
        let m = r.random_range(3..=6);
        let (x, y) = instance(&mut r, m, Shape::MIXED);
        let tv = canonical_interpolant(&samples(&x, &y)).tv_norm();
        let sol = grid_bp_oracle(&x, &y, GridSpec::new(0.05)).unwrap();
        assert!(sol.tv_min >= tv - 1e-9, "{} < {tv}", sol.tv_min);
    }
}

#[test]
fn unique_instances_have_no_triangles_and_reject_moved_knots() {
    let mut r = rng(22);
    for _ in 0..50 {
        let m = r.random_range(4..=20);
        let (x, y) = instance(&mut r, m, Shape::ALTERNATING);
        let s = samples(&x, &y);
        let report = analyze_saturations(&canonical_certificate(&s));
        assert!(report.unique);
        assert!(envelope(&s).triangles.is_empty());
        let f = canonical_interpolant(&s);
        if let Some(k) = f.knots().first() {
            // the knot moved halfway into the next gap violates the certificate
            let i = x.iter().position(|&v| v == k.tau).unwrap();
            let moved = (x[i] + x[i + 1]) / 2.0;
            let knots: Vec<_> = f
                .knots()
                .iter()
                .map(|q| if q.tau == k.tau { sparse_pwl::Knot::new(moved, q.a) } else { *q })
                .collect();
            if let Ok(g) = sparse_pwl::PwlSpline::new(f.b0(), f.b1(), knots) {
                assert!(!verify_solution(&s, &g, 1e-9).passed);
            }
        }
    }
}

#[test]
fn convex_combinations_remain_solutions() {
    let mut r = rng(23);
    for _ in 0..100 {
        let m = r.random_range(4..=30);
        let (x, y) = instance(&mut r, m, Shape::MIXED);
        let s = samples(&x, &y);
        let c = canonical_interpolant(&s);
        let choices: RunChoices =
            (0..m).map(|n| (n, RunChoice::new(r.random_range(0.0..=1.0)).unwrap())).collect();
        let f = sparsest_solution(&s, &choices).unwrap();
        let w = r.random_range(0.0..=1.0);
        let g = c.linear_combination(w, &f, 1.0 - w);
        assert!(verify_solution(&s, &g, 1e-9).passed);
        let e = envelope(&s);
        let scale = y.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        for k in 0..=200 {
            let t = x[0] + (x[m - 1] - x[0]) * k as f64 / 200.0;
            assert!(envelope_contains(&e, (t, g.eval(t)), 1e-9 * scale));
        }
        assert!((g.tv_norm() - canonical_tv(&x, &y)).abs() <= 1e-9 * (1.0 + g.tv_norm()));
    }
}

fn random_data(r: &mut impl Rng, m: usize) -> SampleSet {
    let mut x = vec![0.0];
    for _ in 1..m {
        x.push(x.last().unwrap() + r.random_range(0.1..1.0));
    }
    let y: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
    SampleSet::new(x, y).unwrap()
}

#[test]
fn regularization_path_is_monotone_in_curvature() {
    let mut r = rng(24);
    for _ in 0..10 {
        let m = r.random_range(5..=40);
        let s = random_data(&mut r, m);
        let l = second_difference_matrix(s.x()).unwrap();
        let lm = lambda_max(&s);
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let lambda = lm * 10f64.powf(-4.0 + 4.4 * k as f64 / 11.0);
            let res = admm_solve(&s, lambda, &SolverOptions::default()).unwrap();
            let norm: f64 = l.apply(&res.y_lambda).iter().map(|v| v.abs()).sum();
            assert!(norm <= prev + 1e-6, "{norm} > {prev} at lambda {lambda}");
            prev = norm;
            if lambda >= lm {
                assert!(norm <= 1e-8);
            }
        }
    }
}

#[test]
fn fits_match_sparsest_solution_of_their_values() {
    let mut r = rng(25);
    for _ in 0..40 {
        let m = r.random_range(3..=40);
        let s = random_data(&mut r, m);
        let lambda = lambda_max(&s) * r.random_range(0.001..1.2);
        if lambda == 0.0 {
            continue;
        }
        let f = fit(&s, lambda, &FitOptions::default()).unwrap();
        assert!(f.solver.converged);
        let sl = s.with_y(f.y_lambda.clone()).unwrap();
        assert!(verify_solution(&sl, &f.spline, 1e-7).passed);
        assert_eq!(f.sparsity, f.report.min_sparsity);
        let recomputed = kkt_residual(&s, lambda, &f.y_lambda);
        assert!((recomputed - f.solver.kkt_residual).abs() <= 1e-10);
    }
}

#[test]
fn solver_matches_regression_above_lambda_max() {
    let mut r = rng(26);
    for _ in 0..20 {
        let m = r.random_range(3..=30);
        let s = random_data(&mut r, m);
        let lm = lambda_max(&s);
        let res = admm_solve(&s, 1.01 * lm, &SolverOptions::default()).unwrap();
        let (a, b) = ols(s.x(), s.y());
        for (x, z) in s.x().iter().zip(&res.y_lambda) {
            assert!((a + b * x - z).abs() <= 1e-7);
        }
        assert!(kkt_residual(&s, 1.01 * lm, &res.y_lambda) <= 1e-9);
    }
}

#[test]
fn warm_start_reaches_the_same_point() {
    let mut r = rng(27);
    let s = random_data(&mut r, 25);
    let lambda = 0.05 * lambda_max(&s);
    let cold = admm_solve(&s, lambda, &SolverOptions::default()).unwrap();
    let warm = admm_solve(
        &s,
        lambda,
        &SolverOptions { warm_start: Some(s.y().to_vec()), rho: 4.0, ..SolverOptions::default() },
    )
    .unwrap();
    for (a, b) in cold.y_lambda.iter().zip(&warm.y_lambda) {
        assert!((a - b).abs() <= 1e-8);
    }
}

/// `log cosh(z - y)`: smooth, strictly convex, linear growth in the tails.
struct LogCosh;

impl sparse_pwl::Loss for LogCosh {
    fn value(&self, z: f64, y: f64) -> f64 {
        (z - y).cosh().ln()
    }

    fn derivative(&self, z: f64, y: f64) -> f64 {
        (z - y).tanh()
    }

    fn prox(&self, v: f64, y: f64, step: f64) -> f64 {
        // root of p - v + step * tanh(p - y), bracketed in [v - step, v + step];
        // Newton steps that leave the bracket fall back to bisection
        let (mut lo, mut hi) = (v - step, v + step);
        let mut p = v;
        for _ in 0..200 {
            let t = (p - y).tanh();
            let g = p - v + step * t;
            if g == 0.0 {
                break;
            }
            if g > 0.0 {
                hi = p;
            } else {
                lo = p;
            }
            let newton = p - g / (1.0 + step * (1.0 - t * t));
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - p).abs() <= 1e-16 * (1.0 + p.abs()) {
                p = next;
                break;
            }
            p = next;
        }
        p
    }
}

#[test]
fn general_loss_reaches_optimality() {
    use sparse_pwl::{admm_solve_with, fit_with, kkt_residual_with, lambda_max_with, linear_regression_with};
    let mut r = rng(28);
    for _ in 0..10 {
        let m = r.random_range(4..=30);
        let s = random_data(&mut r, m);
        let lm = lambda_max_with(&s, &LogCosh);
        for frac in [0.01, 0.3, 2.0] {
            let lambda = frac * lm;
            let res = admm_solve_with(&s, lambda, &LogCosh, &SolverOptions::default()).unwrap();
            assert!(
                res.kkt_residual <= 1e-8,
                "kkt {} at {frac} lambda_max after {} iterations ({})",
                res.kkt_residual,
                res.iterations,
                res.converged
            );
            assert!(
                (kkt_residual_with(&s, lambda, &res.y_lambda, &LogCosh) - res.kkt_residual).abs() < 1e-12
            );
            if frac > 1.0 {
                let (a, b) = linear_regression_with(&s, &LogCosh);
                for (x, z) in s.x().iter().zip(&res.y_lambda) {
                    assert!((a + b * x - z).abs() <= 1e-7);
                }
                let f = fit_with(&s, lambda, &LogCosh, &FitOptions::default()).unwrap();
                assert_eq!(f.sparsity, 0);
            }
        }
    }
}
