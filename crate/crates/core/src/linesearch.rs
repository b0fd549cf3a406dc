//! Step sizes for vector-valued objectives.
//!
//! [`wolfe_search`] returns a step satisfying, for `D = D(x, d) < 0`,
//!
//! ```text
//! F_j(x + αd) ≤ F_j(x) + ρ α D      for every j
//! D(x + αd, d) ≥ σ D
//! ```
//!
//! by expansion followed by a bracketing zoom. The bracket keeps `lo`
//! satisfying sufficient decrease with a still-too-negative slope and `hi`
//! violating sufficient decrease; the first zero of
//! `ψ(α) = max_j [F_j(x+αd) − F_j(x) − ραD]` inside the bracket always
//! satisfies the curvature condition, so shrinking the bracket terminates.
//! [`armijo_search`] enforces only the first condition by safeguarded
//! backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::dot;
use crate::problem::{Evaluator, Jacobian};
use crate::subproblem::descent_value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WolfeParams {
    /// Sufficient-decrease coefficient, in `(0, ½)`.
    pub rho: f64,
    /// Curvature coefficient, in `(rho, 1)`.
    pub sigma: f64,
    pub alpha_max: f64,
    pub max_trials: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            rho: 1e-4,
            sigma: 0.1,
            alpha_max: 100.0,
            max_trials: 50,
        }
    }
}

impl WolfeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 0.5) {
            return Err(Error::InvalidConfig(format!("rho = {} must lie in (0, 1/2)", self.rho)));
        }
        if !(self.sigma > self.rho && self.sigma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma = {} must lie in (rho, 1) = ({}, 1)",
                self.sigma, self.rho
            )));
        }
        if !(self.alpha_max >= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha_max = {} must be >= 1", self.alpha_max)));
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidConfig("max_trials must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub trial_count: usize,
    pub unit_step_accepted: bool,
    /// `x + αd`
    pub x_new: Vec<f64>,
    pub f_new: Vec<f64>,
    /// Jacobian at `x + αd` when the search needed it (Wolfe only).
    pub jac_new: Option<Jacobian>,
}

fn trial_point(x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}

fn sufficient_decrease(f_t: &[f64], f_x: &[f64], rho: f64, alpha: f64, dxd: f64) -> bool {
    f_t.iter().zip(f_x).all(|(ft, fx)| *ft <= fx + rho * alpha * dxd)
}

/// Objective values at a trial point; `None` if they are not finite.
fn try_value(ev: &mut Evaluator<'_>, x: &[f64]) -> Result<Option<Vec<f64>>> {
    match ev.value(x) {
        Ok(f) => Ok(Some(f)),
        Err(Error::NonFiniteValue { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn require_descent(dxd: f64) -> Result<()> {
    if dxd < 0.0 {
        Ok(())
    } else {
        Err(Error::LineSearchFailed { trials: 0 })
    }
}

pub fn wolfe_search(
    ev: &mut Evaluator<'_>,
    x: &[f64],
    d: &[f64],
    f_x: &[f64],
    dxd: f64,
    params: &WolfeParams,
) -> Result<LineSearchResult> {
    require_descent(dxd)?;
    let rho = params.rho;
    let merit = |f_t: &[f64], alpha: f64| {
        f_t.iter()
            .zip(f_x)
            .map(|(ft, fx)| ft - fx - rho * alpha * dxd)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let (mut lo, mut merit_lo, mut slope_lo) = (0.0, 0.0, (1.0 - rho) * dxd);
    let mut hi: Option<(f64, f64)> = None;
    let mut alpha = params.alpha_max.min(1.0);

    for trial in 1..=params.max_trials {
        let x_t = trial_point(x, d, alpha);
        match try_value(ev, &x_t)? {
            Some(f_t) if sufficient_decrease(&f_t, f_x, rho, alpha, dxd) => {
                let jac = ev.jacobian(&x_t)?;
                let slope = descent_value(&jac, d);
                if slope >= params.sigma * dxd {
                    return Ok(LineSearchResult {
                        alpha,
                        trial_count: trial,
                        unit_step_accepted: trial == 1 && alpha == 1.0,
                        x_new: x_t,
                        f_new: f_t,
                        jac_new: Some(jac),
                    });
                }
                // Slope of the objective attaining the merit maximum (smallest index on ties).
                let active = f_t
                    .iter()
                    .zip(f_x)
                    .map(|(ft, fx)| ft - fx)
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, v)| if v > best.1 { (j, v) } else { best })
                    .0;
                lo = alpha;
                merit_lo = merit(&f_t, alpha);
                slope_lo = dot(&jac[active], d) - rho * dxd;
            }
            Some(f_t) => hi = Some((alpha, merit(&f_t, alpha))),
            None => hi = Some((alpha, f64::INFINITY)),
        }

        alpha = match hi {
            None => {
                if alpha >= params.alpha_max {
                    return Err(Error::LineSearchFailed { trials: trial });
                }
                (2.0 * alpha).min(params.alpha_max)
            }
            Some((hi_alpha, merit_hi)) => {
                let width = hi_alpha - lo;
                if width <= f64::EPSILON * hi_alpha {
                    return Err(Error::LineSearchFailed { trials: trial });
                }
                zoom_point(lo, merit_lo, slope_lo, hi_alpha, merit_hi)
            }
        };
    }
    Err(Error::LineSearchFailed {
        trials: params.max_trials,
    })
}

/// Minimizer of the quadratic through `(lo, merit_lo)` with slope `slope_lo` and
/// `(hi, merit_hi)`, kept inside the central 80% of the bracket; bisection otherwise.
fn zoom_point(lo: f64, merit_lo: f64, slope_lo: f64, hi: f64, merit_hi: f64) -> f64 {
    let width = hi - lo;
    let mid = lo + 0.5 * width;
    if !merit_hi.is_finite() || !(slope_lo < 0.0) {
        return mid;
    }
    let curvature = (merit_hi - merit_lo - slope_lo * width) / (width * width);
    if !(curvature > 0.0) {
        return mid;
    }
    let candidate = lo - slope_lo / (2.0 * curvature);
    if candidate.is_finite() && candidate >= lo + 0.1 * width && candidate <= hi - 0.1 * width {
        candidate
    } else {
        mid
    }
}

pub fn armijo_search(
    ev: &mut Evaluator<'_>,
    x: &[f64],
    d: &[f64],
    f_x: &[f64],
    dxd: f64,
    params: &WolfeParams,
) -> Result<LineSearchResult> {
    require_descent(dxd)?;
    let mut alpha = 1.0;
    for trial in 1..=params.max_trials {
        let x_t = trial_point(x, d, alpha);
        let f_t = try_value(ev, &x_t)?;
        match f_t {
            Some(f_t) if sufficient_decrease(&f_t, f_x, params.rho, alpha, dxd) => {
                return Ok(LineSearchResult {
                    alpha,
                    trial_count: trial,
                    unit_step_accepted: trial == 1,
                    x_new: x_t,
                    f_new: f_t,
                    jac_new: None,
                });
            }
            Some(f_t) => {
                // Quadratic through h(0) = 0, h'(0) = D, h(α) = max_j ΔF_j.
                let h = f_t
                    .iter()
                    .zip(f_x)
                    .map(|(ft, fx)| ft - fx)
                    .fold(f64::NEG_INFINITY, f64::max);
                let denom = 2.0 * (h - dxd * alpha);
                let candidate = -dxd * alpha * alpha / denom;
                alpha = if candidate.is_finite() && denom > 0.0 {
                    candidate.clamp(0.1 * alpha, 0.5 * alpha)
                } else {
                    0.5 * alpha
                };
            }
            None => alpha *= 0.5,
        }
    }
    Err(Error::LineSearchFailed {
        trials: params.max_trials,
    })
}
