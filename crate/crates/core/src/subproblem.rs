//! The min-max quadratic direction subproblem
//!
//! ```text
//! min_d max_j  ∇F_j(x)ᵀd + ½ dᵀB_j d
//! ```
//!
//! solved through its dual over the unit simplex. For multipliers `λ` write
//! `g(λ) = Σ λ_j ∇F_j` and `B(λ) = Σ λ_j B_j`; the inner minimizer is
//! `d(λ) = −B(λ)⁻¹ g(λ)` and the dual function is
//! `φ(λ) = −½ g(λ)ᵀ B(λ)⁻¹ g(λ)`, concave, with partial derivatives equal to
//! the per-objective model values at `d(λ)`. We maximize `φ` by projected
//! gradient ascent (Barzilai–Borwein trial step, Armijo backtracking), polish
//! with Newton steps on the active face, and recover the primal direction, the
//! optimal value and the multipliers in one pass.
//!
//! With every `B_j = I` the same problem yields the steepest-descent direction,
//! whose negative is the min-norm element of the gradients' convex hull.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, dot, norm, project_simplex, solve_dense, weighted_sum, SymMatrix};
use crate::updates::HessianSet;

/// Directions with norm at or below this are treated as exactly zero.
pub const ZERO_DIRECTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    /// Stop when `‖P(λ + ∇φ) − λ‖ ≤ tolerance · (1 + max_j ‖∇F_j‖)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub armijo: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSolution {
    pub d: Vec<f64>,
    /// Optimal value, `−½ dᵀB(λ)d`; never positive.
    pub theta: f64,
    pub lambda: Vec<f64>,
    pub dual_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepestDescentSolution {
    pub d_sd: Vec<f64>,
    pub lambda_sd: Vec<f64>,
}

/// `D(x, d) = max_j ∇F_j(x)ᵀd`.
pub fn descent_value(gradients: &[Vec<f64>], d: &[f64]) -> f64 {
    gradients
        .iter()
        .map(|g| dot(g, d))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `∇F_jᵀd + ½ dᵀB_j d` for every objective.
pub fn model_values(gradients: &[Vec<f64>], hessians: &HessianSet, d: &[f64]) -> Vec<f64> {
    gradients
        .iter()
        .zip(hessians.matrices())
        .map(|(g, b)| dot(g, d) + 0.5 * b.quad_form(d))
        .collect()
}

struct DualPoint {
    phi: f64,
    /// `∂φ/∂λ_j`, the model value of objective `j` at `d`.
    grad: Vec<f64>,
    d: Vec<f64>,
}

fn dual_point(gradients: &[Vec<f64>], mats: &[SymMatrix], lambda: &[f64]) -> Result<DualPoint> {
    let g = weighted_sum(lambda, gradients);
    let b = SymMatrix::weighted_sum(lambda, mats);
    let d: Vec<f64> = cholesky(&b)?.solve(&g).iter().map(|v| -v).collect();
    let phi = 0.5 * dot(&g, &d);
    let grad = gradients
        .iter()
        .zip(mats)
        .map(|(gj, bj)| dot(gj, &d) + 0.5 * bj.quad_form(&d))
        .collect();
    Ok(DualPoint { phi, grad, d })
}

/// `‖P(λ + ∇φ) − λ‖`
fn projected_residual(lambda: &[f64], grad: &[f64]) -> f64 {
    let unit: Vec<f64> = lambda.iter().zip(grad).map(|(l, g)| l + g).collect();
    let projected = project_simplex(&unit);
    norm(&projected.iter().zip(lambda).map(|(p, l)| p - l).collect::<Vec<_>>())
}

/// Relative duality gap accepted once the ascent cannot move `λ` at working
/// precision. The gap bounds how far the primal objective at `d(λ)` sits above
/// the optimal value, so `θ` is still accurate to this relative level.
const ROUNDOFF_GAP: f64 = 1e-4;

/// `max_j ∂φ/∂λ_j − Σ λ_j ∂φ/∂λ_j`: primal model value at `d(λ)` minus `φ(λ)`.
fn duality_gap(lambda: &[f64], grad: &[f64]) -> f64 {
    let top = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top - dot(lambda, grad)).max(0.0)
}

/// Newton steps on the face of the simplex spanned by the support of `λ`.
///
/// The dual Hessian is `H_ij = −v_iᵀ B(λ)⁻¹ v_j` with `v_j = ∇F_j + B_j d`. A
/// step that would leave the simplex is cut at the boundary. Steps are kept
/// only while they reduce the projected residual.
fn newton_refine(
    gradients: &[Vec<f64>],
    mats: &[SymMatrix],
    mut lambda: Vec<f64>,
    mut point: DualPoint,
    tol: f64,
) -> (Vec<f64>, DualPoint) {
    let mut residual = projected_residual(&lambda, &point.grad);
    for _ in 0..8 {
        if residual <= tol * 1e-3 {
            break;
        }
        let support: Vec<usize> = (0..lambda.len()).filter(|&j| lambda[j] > 0.0).collect();
        let k = support.len();
        if k < 2 {
            break;
        }
        let Ok(factor) = cholesky(&SymMatrix::weighted_sum(&lambda, mats)) else {
            break;
        };
        let v: Vec<Vec<f64>> = support
            .iter()
            .map(|&j| {
                let bd = mats[j].mul_vec(&point.d);
                gradients[j].iter().zip(bd).map(|(g, b)| g + b).collect()
            })
            .collect();
        let w: Vec<Vec<f64>> = v.iter().map(|vj| factor.solve(vj)).collect();
        let mut kkt = vec![vec![0.0; k + 1]; k + 1];
        let mut rhs = vec![0.0; k + 1];
        for a in 0..k {
            for b in 0..k {
                kkt[a][b] = -dot(&v[a], &w[b]);
            }
            kkt[a][k] = 1.0;
            kkt[k][a] = 1.0;
            rhs[a] = -point.grad[support[a]];
        }
        let Some(step) = solve_dense(&kkt, &rhs) else {
            break;
        };
        let mut fraction = 1.0f64;
        for (a, &j) in support.iter().enumerate() {
            if step[a] < 0.0 {
                fraction = fraction.min(-lambda[j] / step[a]);
            }
        }
        let mut trial = lambda.clone();
        for (a, &j) in support.iter().enumerate() {
            trial[j] = (lambda[j] + fraction * step[a]).max(0.0);
        }
        let total: f64 = trial.iter().sum();
        trial.iter_mut().for_each(|t| *t /= total);
        let Ok(candidate) = dual_point(gradients, mats, &trial) else {
            break;
        };
        let r = projected_residual(&trial, &candidate.grad);
        if !(r < residual) {
            break;
        }
        lambda = trial;
        point = candidate;
        residual = r;
    }
    (lambda, point)
}

/// Maximizes the concave dual over the simplex.
///
/// Projected-gradient ascent (Barzilai–Borwein trial step, Armijo
/// backtracking) followed by Newton refinement on the active face. Stops on a
/// small projected gradient or once the duality gap is below
/// `tolerance · |φ|`. The gap test matters when gradients are large, since the
/// dual gradient then scales like `‖∇F‖²` and the absolute test sits under
/// roundoff.
fn maximize_dual(
    gradients: &[Vec<f64>],
    mats: &[SymMatrix],
    start: Option<&[f64]>,
    opts: &DualOptions,
) -> Result<(Vec<f64>, DualPoint, usize)> {
    let m = gradients.len();
    let tol = opts.tolerance * gradient_scale(gradients);
    let converged = |lambda: &[f64], point: &DualPoint| {
        projected_residual(lambda, &point.grad) <= tol
            || duality_gap(lambda, &point.grad) <= opts.tolerance * point.phi.abs()
    };
    let finish = |lambda: Vec<f64>, point: DualPoint, iterations: usize| {
        let (lambda, point) = newton_refine(gradients, mats, lambda, point, tol);
        (lambda, point, iterations)
    };

    let mut lambda = match start {
        Some(l) if l.len() == m => project_simplex(l),
        _ => vec![1.0 / m as f64; m],
    };
    let mut point = dual_point(gradients, mats, &lambda)?;
    let mut step = 1.0 / (1.0 + norm(&point.grad));

    for iteration in 0..opts.max_iterations {
        if converged(&lambda, &point) {
            return Ok(finish(lambda, point, iteration));
        }

        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = lambda
                .iter()
                .zip(&point.grad)
                .map(|(l, g)| l + step * g)
                .collect();
            let trial = project_simplex(&trial);
            let moved: Vec<f64> = trial.iter().zip(&lambda).map(|(t, l)| t - l).collect();
            let candidate = dual_point(gradients, mats, &trial)?;
            if candidate.phi >= point.phi + opts.armijo * dot(&point.grad, &moved) {
                accepted = Some((trial, moved, candidate));
                break;
            }
            step *= 0.5;
        }

        // No strict ascent left at working precision: refine, then judge by the gap.
        let stagnated = accepted.as_ref().is_none_or(|(_, _, c)| c.phi <= point.phi);
        if stagnated {
            let (refined, refined_point) = newton_refine(gradients, mats, lambda.clone(), point, tol);
            let gap = duality_gap(&refined, &refined_point.grad);
            if converged(&refined, &refined_point) || gap <= ROUNDOFF_GAP * refined_point.phi.abs() {
                return Ok((refined, refined_point, iteration));
            }
            lambda = refined;
            point = refined_point;
            if accepted.is_none() {
                break;
            }
            continue;
        }
        let Some((trial, moved, candidate)) = accepted else {
            break;
        };

        // Barzilai–Borwein step for the concave objective: ⟨s,s⟩ / −⟨s,Δ∇φ⟩.
        let dgrad: Vec<f64> = candidate.grad.iter().zip(&point.grad).map(|(a, b)| a - b).collect();
        let curvature = -dot(&moved, &dgrad);
        let ss = dot(&moved, &moved);
        step = if curvature > 0.0 && ss > 0.0 {
            (ss / curvature).clamp(1e-14, 1e14)
        } else {
            (step * 4.0).min(1e14)
        };
        lambda = trial;
        point = candidate;
    }
    let (lambda, point, _) = finish(lambda, point, opts.max_iterations);
    if converged(&lambda, &point) {
        return Ok((lambda, point, opts.max_iterations));
    }
    Err(Error::SubproblemStalled {
        iterations: opts.max_iterations,
        residual: projected_residual(&lambda, &point.grad),
    })
}

fn gradient_scale(gradients: &[Vec<f64>]) -> f64 {
    1.0 + gradients.iter().map(|g| norm(g)).fold(0.0, f64::max)
}

fn check_shapes(gradients: &[Vec<f64>], hessians: &HessianSet) -> Result<()> {
    if gradients.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if gradients.len() != hessians.len() {
        return Err(Error::DimensionMismatch {
            expected: hessians.len(),
            got: gradients.len(),
        });
    }
    let n = hessians.dim();
    if let Some(g) = gradients.iter().find(|g| g.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    Ok(())
}

pub fn solve_direction(gradients: &[Vec<f64>], hessians: &HessianSet) -> Result<DirectionSolution> {
    solve_direction_with(gradients, hessians, None, &DualOptions::default())
}

/// As [`solve_direction`], optionally warm-starting the multipliers.
pub fn solve_direction_with(
    gradients: &[Vec<f64>],
    hessians: &HessianSet,
    warm_start: Option<&[f64]>,
    opts: &DualOptions,
) -> Result<DirectionSolution> {
    check_shapes(gradients, hessians)?;
    let (lambda, point, iterations) = maximize_dual(gradients, hessians.matrices(), warm_start, opts)?;

    let mut d = point.d;
    // Near criticality d(λ) can be roundoff whose primal value is not below
    // that of d = 0; weak duality then bounds the error of zero by |φ|.
    let no_better_than_zero = point.grad.iter().copied().fold(f64::NEG_INFINITY, f64::max) >= 0.0;
    let theta = if norm(&d) <= ZERO_DIRECTION || no_better_than_zero {
        d.iter_mut().for_each(|v| *v = 0.0);
        0.0
    } else {
        let b = SymMatrix::weighted_sum(&lambda, hessians.matrices());
        (-0.5 * b.quad_form(&d)).min(0.0)
    };
    Ok(DirectionSolution {
        d,
        theta,
        lambda,
        dual_iterations: iterations,
    })
}

/// Steepest-descent direction `d_SD = −Σ λ_j ∇F_j`, with `λ` minimizing the
/// norm of the convex combination.
pub fn solve_steepest(gradients: &[Vec<f64>]) -> Result<SteepestDescentSolution> {
    let Some(n) = gradients.first().map(Vec::len) else {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    };
    if let Some(g) = gradients.iter().find(|g| g.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    let identity = vec![SymMatrix::identity(n); gradients.len()];
    let (lambda, point, _) = maximize_dual(gradients, &identity, None, &DualOptions::default())?;
    let mut d_sd = point.d;
    if norm(&d_sd) <= ZERO_DIRECTION {
        d_sd.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(SteepestDescentSolution {
        d_sd,
        lambda_sd: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn scalar_newton_step() {
        let b = HessianSet::new(vec![SymMatrix::diagonal(&[2.0])]);
        let sol = solve_direction(&scalars(&[2.0]), &b).unwrap();
        assert!((sol.d[0] + 1.0).abs() < 1e-14);
        assert!((sol.theta + 1.0).abs() < 1e-14);
        assert_eq!(sol.lambda, vec![1.0]);
    }

    #[test]
    fn opposite_gradients_are_critical() {
        let b = HessianSet::identity(2, 1);
        let sol = solve_direction(&scalars(&[1.0, -2.0]), &b).unwrap();
        assert!(sol.d[0].abs() <= 1e-10, "{sol:?}");
        assert!(sol.theta.abs() <= 1e-10);
        assert!((sol.lambda[0] - 2.0 / 3.0).abs() < 1e-8);
    }

    /// Oracle: grid search of `max(d + d²/2, 2d + d²/2)` over `[-3, 3]`.
    #[test]
    fn same_sign_gradients_match_grid() {
        let (mut best_d, mut best_v) = (0.0, f64::INFINITY);
        let mut d = -3.0;
        while d <= 3.0 {
            let v = f64::max(d + 0.5 * d * d, 2.0 * d + 0.5 * d * d);
            if v < best_v {
                best_v = v;
                best_d = d;
            }
            d += 1e-4;
        }
        assert!((best_d + 1.0).abs() < 1e-3 && (best_v + 0.5).abs() < 1e-6);

        let b = HessianSet::identity(2, 1);
        let sol = solve_direction(&scalars(&[1.0, 2.0]), &b).unwrap();
        assert!((sol.d[0] - best_d).abs() < 1e-3);
        assert!((sol.theta - best_v).abs() < 1e-6);
        assert!((sol.d[0] + 1.0).abs() < 1e-10);
        assert!((sol.theta + 0.5).abs() < 1e-10);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-10 && sol.lambda[1].abs() < 1e-10);
    }

    #[test]
    fn steepest_examples() {
        let sol = solve_steepest(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(sol.d_sd, vec![-3.0, -4.0]);

        let sol = solve_steepest(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        for (a, b) in sol.d_sd.iter().zip([-0.5, -0.5]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((sol.lambda_sd[0] - 0.5).abs() < 1e-10);

        let sol = solve_steepest(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
        assert!(norm(&sol.d_sd) <= 1e-10);
    }

    /// Oracle: min-norm point of the hull of `(1,0)`, `(0,1)` over a λ grid.
    #[test]
    fn steepest_matches_lambda_grid() {
        let g = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let best = (0..=10_000)
            .map(|i| i as f64 * 1e-4)
            .min_by(|a, b| {
                let na = a * a + (1.0 - a) * (1.0 - a);
                let nb = b * b + (1.0 - b) * (1.0 - b);
                na.total_cmp(&nb)
            })
            .unwrap();
        let sol = solve_steepest(&g).unwrap();
        assert!((sol.lambda_sd[0] - best).abs() <= 1e-4);
    }

    #[test]
    fn descent_value_examples() {
        let g = [vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(descent_value(&g, &[-1.0, -1.0]), -1.0);
        assert_eq!(descent_value(&g, &[0.0, 0.0]), 0.0);
        let g = [vec![1.0, 2.0], vec![3.0, -1.0]];
        assert_eq!(descent_value(&g, &[1.0, 1.0]), 3.0);
    }

    #[test]
    fn shape_errors() {
        let b = HessianSet::identity(2, 2);
        assert!(matches!(
            solve_direction(&[vec![1.0, 0.0]], &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            solve_direction(&[vec![1.0], vec![0.0]], &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let b = HessianSet::new(vec![
            SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap(),
            SymMatrix::diagonal(&[1.0, 3.0]),
        ]);
        let g = [vec![1.0, -0.5], vec![-0.2, 1.5]];
        let cold = solve_direction(&g, &b).unwrap();
        let warm = solve_direction_with(&g, &b, Some(&cold.lambda), &DualOptions::default()).unwrap();
        assert_eq!(warm.dual_iterations, 0);
        for (a, c) in warm.d.iter().zip(&cold.d) {
            assert!((a - c).abs() < 1e-9);
        }
    }
}
