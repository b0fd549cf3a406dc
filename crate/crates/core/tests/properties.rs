//! Property tests for the numerical kernels, metrics and solver invariants.

use proptest::prelude::*;

use moo_bfgs::metrics::{nondominated_filter, performance_profile, purity, FrontArchive, ProfileTable};
use moo_bfgs::numerics::{cholesky, project_simplex, solve_spd, SymMatrix};
use moo_bfgs::problem::{finite_difference_jacobian, random_start, suite};
use moo_bfgs::solver::{run, SolverConfig, TraceLevel, Variant};
use moo_bfgs::subproblem::{descent_value, solve_direction, solve_steepest};
use moo_bfgs::updates::{
    bfgs_update, bfgs_wolfe_update, corrected_quantities, psi_diagnostic, CorrectionInputs, HessianSet,
};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn vector(n: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, n)
}

/// `AAᵀ + shift·I`.
fn spd(n: usize, shift: f64) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(vector(n, 1.0), n).prop_map(move |a| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| dot(&a[i], &a[j]) + if i == j { shift } else { 0.0 }).collect())
            .collect();
        SymMatrix::from_rows(&rows).unwrap()
    })
}

/// Dimension, then `m` SPD matrices and `m` gradients.
fn subproblem_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<SymMatrix>)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(vector(n, 3.0), m),
            prop::collection::vec(spd(n, 0.1), m),
        )
    })
}

/// `v + c·s` with `c` chosen so that the result has curvature `≥ 0.1‖s‖²` along `s`.
fn with_positive_curvature(v: &[f64], s: &[f64]) -> Vec<f64> {
    let c = dot(v, s).abs() / dot(s, s) + 0.1;
    v.iter().zip(s).map(|(a, b)| a + c * b).collect()
}

fn brute_force(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dominates = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y) && a != b;
    let mut keep: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .cloned()
        .collect();
    keep.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keep.dedup();
    keep
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn simplex_projection_is_feasible_idempotent_and_closest(v in vector(5, 4.0), w in vector(5, 1.0)) {
        let p = project_simplex(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert_eq!(project_simplex(&p), p.clone());
        // No other simplex point is closer to v.
        let q = project_simplex(&w);
        let dist = |a: &[f64]| norm(&a.iter().zip(&v).map(|(x, y)| x - y).collect::<Vec<_>>());
        prop_assert!(dist(&p) <= dist(&q) + 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_systems((a, b) in (1usize..=6).prop_flat_map(|n| (spd(n, 0.05), vector(n, 10.0)))) {
        let z = solve_spd(&a, &b).unwrap();
        let r: Vec<f64> = a.mul_vec(&z).iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(norm(&r) <= 1e-10 * (1.0 + norm(&b)));
    }

    #[test]
    fn psi_is_at_least_dimension(a in (1usize..=5).prop_flat_map(|n| spd(n, 0.01))) {
        prop_assert!(psi_diagnostic(&a).unwrap() >= a.dim() as f64 - 1e-9);
    }

    #[test]
    fn bfgs_update_keeps_spd_and_secant(
        (b, s, gamma) in (1usize..=5).prop_flat_map(|n| (spd(n, 0.1), vector(n, 2.0), vector(n, 2.0)))
    ) {
        prop_assume!(norm(&s) > 1e-3);
        let gamma = with_positive_curvature(&gamma, &s);
        let next = bfgs_update(&b, &s, &gamma).unwrap();
        prop_assert!(cholesky(&next).is_ok());
        let bs = next.mul_vec(&s);
        let err = norm(&bs.iter().zip(&gamma).map(|(x, y)| x - y).collect::<Vec<_>>());
        prop_assert!(err <= 1e-10 * norm(&gamma).max(1.0) * (1.0 + next.frobenius_norm() * norm(&s)));
    }

    #[test]
    fn bfgs_wolfe_reduces_to_bfgs_with_positive_curvature(
        (b, s, y) in (1usize..=5).prop_flat_map(|n| (spd(n, 0.1), vector(n, 2.0), vector(n, 2.0)))
    ) {
        prop_assume!(norm(&s) > 1e-3);
        let y = with_positive_curvature(&y, &s);
        let a = bfgs_wolfe_update(&b, &s, &y, 0.0, 0.0).unwrap();
        let c = bfgs_update(&b, &s, &y).unwrap();
        let n = b.dim();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((a.get(i, j) - c.get(i, j)).abs() <= 1e-9 * (1.0 + c.get(i, j).abs()));
            }
        }
    }

    #[test]
    fn corrected_curvature_is_bounded_below(
        (s, y, grads, mu_raw) in (1usize..=4, 1usize..=3).prop_flat_map(|(n, m)| (
            vector(n, 2.0),
            prop::collection::vec(vector(n, 5.0), m),
            prop::collection::vec(vector(n, 3.0), m),
            vector(m, 1.0),
        ))
    ) {
        prop_assume!(norm(&s) > 1e-6);
        let mu = project_simplex(&mu_raw);
        let lower = SolverConfig::default().vartheta_lower;
        let (gammas, diag) = corrected_quantities(&CorrectionInputs {
            s: &s,
            y: &y,
            mu: &mu,
            vartheta: 0.1,
            grad_current: &grads,
        }).unwrap();
        let combo: Vec<f64> = (0..s.len()).map(|k| grads.iter().zip(&mu).map(|(g, w)| w * g[k]).sum()).collect();
        let bound = lower * norm(&combo) * dot(&s, &s);
        for (gamma, gs) in gammas.iter().zip(&diag.gamma_dot_s) {
            prop_assert!((dot(gamma, &s) - gs).abs() <= 1e-12 * (1.0 + gs.abs()));
            prop_assert!(*gs >= bound);
        }
        prop_assert!(diag.r.iter().all(|r| *r >= 0.1 * norm(&combo) - 1e-12));
    }

    #[test]
    fn subproblem_solution_is_consistent((grads, mats) in subproblem_instance()) {
        let set = HessianSet::new(mats.clone());
        let sol = solve_direction(&grads, &set).unwrap();
        prop_assert!(sol.theta <= 0.0);
        prop_assert!((sol.lambda.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(sol.lambda.iter().all(|l| *l >= 0.0));
        let scale = 1.0 + grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
        let b = SymMatrix::weighted_sum(&sol.lambda, &mats);
        let g: Vec<f64> = (0..b.dim()).map(|k| grads.iter().zip(&sol.lambda).map(|(gj, l)| l * gj[k]).sum()).collect();
        let kkt: Vec<f64> = b.mul_vec(&sol.d).iter().zip(&g).map(|(x, y)| x + y).collect();
        prop_assert!(norm(&kkt) <= 1e-8 * scale);
        if sol.d.iter().any(|v| *v != 0.0) {
            prop_assert!(descent_value(&grads, &sol.d) < sol.theta);
        } else {
            prop_assert_eq!(sol.theta, 0.0);
        }
    }

    #[test]
    fn steepest_descent_is_min_norm_point((grads, _) in subproblem_instance(), w in vector(4, 1.0)) {
        let sd = solve_steepest(&grads).unwrap();
        let n = grads[0].len();
        let combo = |l: &[f64]| -> Vec<f64> { (0..n).map(|k| grads.iter().zip(l).map(|(g, x)| x * g[k]).sum()).collect() };
        let d_from_lambda: Vec<f64> = combo(&sd.lambda_sd).iter().map(|v| -v).collect();
        if sd.d_sd.iter().any(|v| *v != 0.0) {
            prop_assert!(norm(&d_from_lambda.iter().zip(&sd.d_sd).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-10);
        }
        let other = project_simplex(&w[..grads.len()]);
        prop_assert!(norm(&sd.d_sd) <= norm(&combo(&other)) + 1e-9);
    }

    #[test]
    fn filter_matches_brute_force(points in prop::collection::vec(prop::collection::vec(0u8..12, 2), 0..200)) {
        let points: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|v| *v as f64).collect()).collect();
        let mut got = nondominated_filter(&points).vectors();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(got, brute_force(&points));
    }

    #[test]
    fn reference_front_has_full_purity(points in prop::collection::vec(vector(3, 5.0), 1..60)) {
        let reference = nondominated_filter(&points);
        prop_assert_eq!(purity(&reference, &reference).unwrap(), 1.0);
        let union = FrontArchive::union([&reference, &nondominated_filter(&points[..1])]);
        prop_assert_eq!(union, reference);
    }

    #[test]
    fn profiles_are_scale_invariant_and_monotone(
        cost in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, 0.1f64..100.0), 3), 1..20),
        factor in 0.01f64..100.0,
    ) {
        let table = |cost: Vec<Vec<Option<f64>>>| ProfileTable {
            solvers: vec!["a".into(), "b".into(), "c".into()],
            instances: (0..cost.len()).map(|i| i.to_string()).collect(),
            cost,
        };
        let base = performance_profile(&table(cost.clone()));
        let scaled = performance_profile(&table(
            cost.iter().map(|row| row.iter().map(|c| c.map(|v| v * factor)).collect()).collect(),
        ));
        for (a, b) in base.iter().zip(&scaled) {
            for tau in [1.0, 1.5, 2.0, 4.0, 10.0, 1e6] {
                prop_assert!((a.rho_at(tau) - b.rho_at(tau)).abs() <= 1e-12);
            }
            prop_assert!(a.breakpoints.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        }
        for (s, curve) in base.iter().enumerate() {
            let successes = cost.iter().filter(|row| row[s].is_some()).count();
            prop_assert!((curve.rho_at(f64::INFINITY) - successes as f64 / cost.len() as f64).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jacobians_match_finite_differences(index in 0usize..12, seed in any::<u64>()) {
        let p = &suite()[index];
        let meta = p.meta();
        // Stay inside the box so one-sided domain limits (DGO2) are not crossed.
        let x: Vec<f64> = random_start(p, seed)
            .iter()
            .zip(meta.lower.iter().zip(&meta.upper))
            .map(|(v, (lo, hi))| {
                let mid = 0.5 * (lo + hi);
                mid + 0.9 * (v - mid)
            })
            .collect();
        let exact = p.jacobian_raw(&x);
        let approx = finite_difference_jacobian(p, &x, 1e-6);
        for (row_e, row_a) in exact.iter().zip(&approx) {
            for (e, a) in row_e.iter().zip(row_a) {
                prop_assert!((e - a).abs() <= 1e-4 * (1.0 + e.abs()), "{}: {} vs {}", meta.name, e, a);
            }
        }
    }

    #[test]
    fn random_starts_are_deterministic_and_in_box(index in 0usize..12, seed in any::<u64>()) {
        let p = &suite()[index];
        let x = random_start(p, seed);
        prop_assert_eq!(&x, &random_start(p, seed));
        let meta = p.meta();
        for (v, (lo, hi)) in x.iter().zip(meta.lower.iter().zip(&meta.upper)) {
            prop_assert!(lo <= v && v < hi);
        }
    }

    #[test]
    fn wolfe_runs_decrease_every_objective(index in 0usize..12, seed in 0u64..1000, variant in 0usize..3) {
        let p = &suite()[index];
        let cfg = SolverConfig {
            variant: Variant::ALL[variant],
            trace_level: TraceLevel::Iterations,
            max_iters: 200,
            ..SolverConfig::default()
        };
        let r = run(p, &random_start(p, seed), &cfg).unwrap();
        for pair in r.trace.windows(2) {
            prop_assert!(pair[0].theta <= 0.0);
            prop_assert!(pair[0].descent < pair[0].theta);
            for (next, prev) in pair[1].f_x.iter().zip(&pair[0].f_x) {
                prop_assert!(next < prev);
            }
        }
        if r.converged() {
            prop_assert!(r.theta.abs() <= cfg.theta_tol);
        }
    }
}
