//! Hessian-approximation updates.
//!
//! Three rules are provided:
//!
//! * the corrected BFGS update, which replaces `y_j` by `γ_j = y_j + r_j s` with
//!   `r_j = max{−y_jᵀs/‖s‖², 0} + ϑ‖Σ μ_i ∇F_i(x)‖` so that `γ_jᵀs > 0` holds at
//!   every non-critical iterate without any convexity assumption;
//! * the BFGS-Wolfe rule, a three-term update whose scaling `ρ_j` falls back to
//!   `1 / (D(x⁺, s) − ∇F_j(x)ᵀs)` when `y_jᵀs ≤ 0`;
//! * the cautious rule, which skips the update unless `y_jᵀs` clears
//!   `ε min{1, |θ(x)|}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, dot, norm, weighted_sum, SymMatrix};

/// Steps shorter than this cannot be used for a secant update.
pub const MIN_STEP_NORM: f64 = 1e-300;

/// The `m` positive-definite approximations `B_1 … B_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianSet {
    mats: Vec<SymMatrix>,
}

impl HessianSet {
    pub fn new(mats: Vec<SymMatrix>) -> Self {
        assert!(!mats.is_empty(), "need at least one matrix");
        let n = mats[0].dim();
        assert!(mats.iter().all(|b| b.dim() == n), "matrices must share a dimension");
        Self { mats }
    }

    pub fn identity(m: usize, n: usize) -> Self {
        Self::new(vec![SymMatrix::identity(n); m])
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.mats
    }

    pub fn get(&self, j: usize) -> &SymMatrix {
        &self.mats[j]
    }

    pub fn set(&mut self, j: usize, b: SymMatrix) {
        assert_eq!(b.dim(), self.dim());
        self.mats[j] = b;
    }

    /// Whether every member admits a Cholesky factorization.
    pub fn all_positive_definite(&self) -> bool {
        self.mats.iter().all(|b| cholesky(b).is_ok())
    }
}

#[derive(Debug, Clone)]
pub struct CorrectionInputs<'a> {
    /// `x⁺ − x`
    pub s: &'a [f64],
    /// `∇F_j(x⁺) − ∇F_j(x)` per objective.
    pub y: &'a [Vec<f64>],
    pub mu: &'a [f64],
    pub vartheta: f64,
    /// Gradients at the current (pre-step) iterate.
    pub grad_current: &'a [Vec<f64>],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub eta: Vec<f64>,
    pub r: Vec<f64>,
    pub gamma_dot_s: Vec<f64>,
    pub s_norm: f64,
    /// `‖Σ μ_i ∇F_i(x)‖`
    pub mu_gradient_norm: f64,
    /// `‖d_SD(x)‖`, when it was computed for this iterate.
    pub d_sd_norm: Option<f64>,
    /// `trace(B_j) − ln det(B_j)` after the update.
    pub psi: Option<Vec<f64>>,
    /// Objectives whose matrix was left unchanged (cautious rule).
    pub skipped: Vec<usize>,
}

/// Computes `η_j`, `r_j` and `γ_j = y_j + r_j s`.
pub fn corrected_quantities(inp: &CorrectionInputs<'_>) -> Result<(Vec<Vec<f64>>, UpdateDiagnostics)> {
    let s_norm = norm(inp.s);
    if !(s_norm > MIN_STEP_NORM) {
        return Err(Error::DegenerateStep { norm: s_norm });
    }
    let ss = s_norm * s_norm;
    let mu_gradient_norm = norm(&weighted_sum(inp.mu, inp.grad_current));
    let shift = inp.vartheta * mu_gradient_norm;

    let mut diag = UpdateDiagnostics {
        s_norm,
        mu_gradient_norm,
        ..Default::default()
    };
    let gammas = inp
        .y
        .iter()
        .map(|y| {
            let eta = dot(y, inp.s) / ss;
            let r = (-eta).max(0.0) + shift;
            let gamma: Vec<f64> = y.iter().zip(inp.s).map(|(yi, si)| yi + r * si).collect();
            diag.eta.push(eta);
            diag.r.push(r);
            diag.gamma_dot_s.push(dot(&gamma, inp.s));
            gamma
        })
        .collect();
    Ok((gammas, diag))
}

/// `B⁺ = B − (Bs)(Bs)ᵀ/(sᵀBs) + γγᵀ/(γᵀs)`.
pub fn bfgs_update(b: &SymMatrix, s: &[f64], gamma: &[f64]) -> Result<SymMatrix> {
    let gs = dot(gamma, s);
    if !(gs > 0.0) {
        return Err(Error::CurvatureViolation { value: gs });
    }
    let bs = b.mul_vec(s);
    let sbs = dot(s, &bs);
    if !(sbs > 0.0) {
        return Err(Error::NotPositiveDefinite { index: 0, pivot: sbs });
    }
    let mut out = b.clone();
    out.add_sym_outer(-1.0 / sbs, &bs, &bs);
    out.add_sym_outer(1.0 / gs, gamma, gamma);
    out.symmetrize();
    Ok(out)
}

/// `ρ⁻¹` for the BFGS-Wolfe rule.
pub fn bfgs_wolfe_rho_inverse(y_dot_s: f64, d_next_s: f64, g_dot_s: f64) -> f64 {
    if y_dot_s > 0.0 {
        y_dot_s
    } else {
        d_next_s - g_dot_s
    }
}

/// Three-term BFGS-Wolfe update. With `t = ρ⁻¹`, `c = t − yᵀs` and
/// `q = c² + t sᵀBs`:
///
/// ```text
/// B⁺ = B − (t BssᵀB − (sᵀBs) yyᵀ)/q + c (ysᵀB + Bsyᵀ)/q
/// ```
///
/// which is the inverse of `(I − ρsyᵀ) B⁻¹ (I − ρysᵀ) + ρssᵀ` and reduces to
/// the textbook update when `t = yᵀs`.
pub fn bfgs_wolfe_update(b: &SymMatrix, s: &[f64], y: &[f64], d_next_s: f64, g_dot_s: f64) -> Result<SymMatrix> {
    let ys = dot(y, s);
    let t = bfgs_wolfe_rho_inverse(ys, d_next_s, g_dot_s);
    if !(t > 0.0) {
        return Err(Error::CurvatureViolation { value: t });
    }
    let bs = b.mul_vec(s);
    let sbs = dot(s, &bs);
    if !(sbs > 0.0) {
        return Err(Error::NotPositiveDefinite { index: 0, pivot: sbs });
    }
    let c = t - ys;
    let q = c * c + t * sbs;
    let mut out = b.clone();
    out.add_sym_outer(-t / q, &bs, &bs);
    out.add_sym_outer(sbs / q, y, y);
    out.add_sym_outer(2.0 * c / q, y, &bs);
    out.symmetrize();
    Ok(out)
}

/// Standard update with `y` when `yᵀs ≥ ε min{1, |θ|}` and `yᵀs > 0`; otherwise `B`.
/// Returns whether the update was applied.
pub fn cautious_update(b: &SymMatrix, s: &[f64], y: &[f64], theta: f64, epsilon: f64) -> (SymMatrix, bool) {
    let ys = dot(y, s);
    let threshold = epsilon * theta.abs().min(1.0);
    if ys >= threshold && ys > 0.0 {
        if let Ok(updated) = bfgs_update(b, s, y) {
            return (updated, true);
        }
    }
    (b.clone(), false)
}

/// `ψ(B) = trace(B) − ln det(B)`.
pub fn psi_diagnostic(b: &SymMatrix) -> Result<f64> {
    let factor = cholesky(b)?;
    Ok(b.trace() - factor.log_det())
}
