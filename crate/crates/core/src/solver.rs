//! Outer iteration: direction subproblem, stopping test, line search, update.
//!
//! All three variants share the loop and differ only in the line search and
//! in how `B_j` is updated after the step:
//!
//! | variant                  | step size      | update                          |
//! |--------------------------|----------------|---------------------------------|
//! | `global-bfgs`            | Wolfe          | corrected BFGS, `γ = y + r s`   |
//! | `bfgs-wolfe`             | Wolfe          | three-term rule with `ρ_j`      |
//! | `cautious-bfgs-armijo`   | Armijo         | skipped unless `yᵀs` is large   |

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{armijo_search, wolfe_search, WolfeParams};
use crate::numerics::{dot, norm, sub};
use crate::problem::{random_start, EvalCounter, Evaluator, Problem};
use crate::subproblem::{descent_value, solve_direction_with, solve_steepest, DualOptions};
use crate::updates::{
    bfgs_update, bfgs_wolfe_update, cautious_update, corrected_quantities, psi_diagnostic, CorrectionInputs,
    HessianSet, UpdateDiagnostics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    GlobalBfgs,
    BfgsWolfe,
    CautiousBfgsArmijo,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::GlobalBfgs, Variant::BfgsWolfe, Variant::CautiousBfgsArmijo];

    pub fn name(self) -> &'static str {
        match self {
            Variant::GlobalBfgs => "global-bfgs",
            Variant::BfgsWolfe => "bfgs-wolfe",
            Variant::CautiousBfgsArmijo => "cautious-bfgs-armijo",
        }
    }

    pub fn uses_wolfe(self) -> bool {
        !matches!(self, Variant::CautiousBfgsArmijo)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSolver(s.to_string()))
    }
}

/// Which multiplier enters `r_j = max{−η_j, 0} + ϑ‖Σ μ_i ∇F_i(x)‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RChoice {
    /// `μ = λ_SD(x)`, the steepest-descent multipliers (one extra subproblem per iteration).
    Choice1,
    /// `μ = λ(x)`, the multipliers of the direction subproblem itself.
    Choice2,
    /// `r ≡ 0`: the plain BFGS update. Loses the positivity guarantee; for regression tests.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceLevel {
    None,
    /// One record per iteration.
    Iterations,
    /// Records plus update diagnostics, `‖d_SD‖` and `ψ(B_j)`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub variant: Variant,
    pub rho: f64,
    pub sigma: f64,
    pub vartheta: f64,
    pub vartheta_lower: f64,
    pub vartheta_upper: f64,
    pub epsilon_cautious: f64,
    pub theta_tol: f64,
    pub max_iters: usize,
    pub r_choice: RChoice,
    pub trace_level: TraceLevel,
    /// Start each dual solve from the previous iterate's multipliers.
    pub warm_start_dual: bool,
    pub alpha_max: f64,
    pub max_trials: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::GlobalBfgs,
            rho: 1e-4,
            sigma: 0.1,
            vartheta: 0.1,
            vartheta_lower: 1e-4,
            vartheta_upper: 1.0,
            epsilon_cautious: 1e-6,
            theta_tol: 5.0 * f64::EPSILON.sqrt(),
            max_iters: 2000,
            r_choice: RChoice::Choice2,
            trace_level: TraceLevel::None,
            warm_start_dual: false,
            alpha_max: 100.0,
            max_trials: 50,
        }
    }
}

impl SolverConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn wolfe_params(&self) -> WolfeParams {
        WolfeParams {
            rho: self.rho,
            sigma: self.sigma,
            alpha_max: self.alpha_max,
            max_trials: self.max_trials,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.wolfe_params().validate()?;
        if !(self.vartheta_lower > 0.0 && self.vartheta_lower <= self.vartheta_upper) {
            return Err(Error::InvalidConfig(format!(
                "vartheta bounds must satisfy 0 < {} <= {}",
                self.vartheta_lower, self.vartheta_upper
            )));
        }
        if !(self.vartheta > self.vartheta_lower && self.vartheta < self.vartheta_upper) {
            return Err(Error::InvalidConfig(format!(
                "vartheta = {} must lie in ({}, {})",
                self.vartheta, self.vartheta_lower, self.vartheta_upper
            )));
        }
        if !(self.epsilon_cautious > 0.0) {
            return Err(Error::InvalidConfig("epsilon_cautious must be positive".into()));
        }
        if !(self.theta_tol > 0.0) {
            return Err(Error::InvalidConfig("theta_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIters,
    LineSearchFailed,
    SubproblemStalled,
    NonFiniteValue,
    /// A Hessian approximation lost positive definiteness or a secant pair was unusable.
    UpdateFailed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max-iters",
            Status::LineSearchFailed => "line-search-failed",
            Status::SubproblemStalled => "subproblem-stalled",
            Status::NonFiniteValue => "non-finite-value",
            Status::UpdateFailed => "update-failed",
        }
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::SubproblemStalled { .. } => Status::SubproblemStalled,
            Error::LineSearchFailed { .. } => Status::LineSearchFailed,
            Error::NonFiniteValue { .. } => Status::NonFiniteValue,
            _ => Status::UpdateFailed,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Status::Converged,
            Status::MaxIters,
            Status::LineSearchFailed,
            Status::SubproblemStalled,
            Status::NonFiniteValue,
            Status::UpdateFailed,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| Error::Bundle(format!("unknown status `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_x: Vec<f64>,
    pub theta: f64,
    pub d: Vec<f64>,
    pub d_norm: f64,
    /// `D(x, d)`
    pub descent: f64,
    pub lambda: Vec<f64>,
    /// `None` on the terminal record, where no step is taken.
    pub alpha: Option<f64>,
    pub unit_step: bool,
    pub trials: usize,
    pub d_sd_norm: Option<f64>,
    pub update: Option<UpdateDiagnostics>,
    pub evals: EvalCounter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: String,
    pub variant: Variant,
    pub status: Status,
    pub x: Vec<f64>,
    pub f_x: Vec<f64>,
    pub theta: f64,
    pub iterations: usize,
    pub evals: EvalCounter,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterationRecord>,
}

impl RunResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

struct RunState<'p> {
    ev: Evaluator<'p>,
    x: Vec<f64>,
    f: Vec<f64>,
    theta: f64,
    k: usize,
    trace: Vec<IterationRecord>,
}

/// Runs the configured variant from `x0`.
///
/// Only configuration and dimension errors are returned as `Err`; numerical
/// failures end the run and are reported through [`RunResult::status`].
pub fn run(p: &Problem, x0: &[f64], cfg: &SolverConfig) -> Result<RunResult> {
    cfg.validate()?;
    if x0.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: x0.len(),
        });
    }
    let started = Instant::now();
    let mut state = RunState {
        ev: Evaluator::new(p),
        x: x0.to_vec(),
        f: Vec::new(),
        theta: f64::NAN,
        k: 0,
        trace: Vec::new(),
    };
    let (status, message) = match iterate(&mut state, cfg) {
        Ok(status) => (status, None),
        Err(e) => (Status::from_error(&e), Some(e.to_string())),
    };
    let f_x = if state.f.is_empty() {
        p.value_raw(&state.x)
    } else {
        state.f
    };
    Ok(RunResult {
        problem: p.name().to_string(),
        variant: cfg.variant,
        status,
        x: state.x,
        f_x,
        theta: state.theta,
        iterations: state.k,
        evals: state.ev.counts(),
        wall_time: started.elapsed().as_secs_f64(),
        message,
        trace: state.trace,
    })
}

fn iterate(st: &mut RunState<'_>, cfg: &SolverConfig) -> Result<Status> {
    let (f, mut jac) = st.ev.evaluate(&st.x)?;
    st.f = f;
    let m = jac.len();
    let mut hessians = HessianSet::identity(m, st.x.len());
    let params = cfg.wolfe_params();
    let dual = DualOptions::default();
    let mut prev_lambda: Option<Vec<f64>> = None;
    let tracing = cfg.trace_level > TraceLevel::None;
    let full = cfg.trace_level == TraceLevel::Full;

    loop {
        let warm = if cfg.warm_start_dual { prev_lambda.as_deref() } else { None };
        let sol = solve_direction_with(&jac, &hessians, warm, &dual)?;
        st.theta = sol.theta;
        let needs_sd = full || (cfg.variant == Variant::GlobalBfgs && cfg.r_choice == RChoice::Choice1);
        let steepest = if needs_sd { Some(solve_steepest(&jac)?) } else { None };
        let d_sd_norm = steepest.as_ref().map(|s| norm(&s.d_sd));
        let descent = descent_value(&jac, &sol.d);

        let mut record = tracing.then(|| IterationRecord {
            k: st.k,
            x: st.x.clone(),
            f_x: st.f.clone(),
            theta: sol.theta,
            d: sol.d.clone(),
            d_norm: norm(&sol.d),
            descent,
            lambda: sol.lambda.clone(),
            alpha: None,
            unit_step: false,
            trials: 0,
            d_sd_norm,
            update: None,
            evals: st.ev.counts(),
        });

        if sol.theta.abs() <= cfg.theta_tol {
            st.trace.extend(record);
            return Ok(Status::Converged);
        }
        if st.k >= cfg.max_iters {
            st.trace.extend(record);
            return Ok(Status::MaxIters);
        }

        let step = if cfg.variant.uses_wolfe() {
            wolfe_search(&mut st.ev, &st.x, &sol.d, &st.f, descent, &params)
        } else {
            armijo_search(&mut st.ev, &st.x, &sol.d, &st.f, descent, &params)
        };
        let step = match step {
            Ok(step) => step,
            Err(e) => {
                st.trace.extend(record);
                return Err(e);
            }
        };
        let jac_new = match step.jac_new {
            Some(j) => j,
            None => st.ev.jacobian(&step.x_new)?,
        };

        let s = sub(&step.x_new, &st.x);
        let y: Vec<Vec<f64>> = jac_new.iter().zip(&jac).map(|(a, b)| sub(a, b)).collect();
        let mut diag = match cfg.variant {
            Variant::GlobalBfgs => {
                let (gammas, mut diag) = match cfg.r_choice {
                    RChoice::Zero => (y.clone(), plain_diagnostics(&s, &y)),
                    choice => {
                        let mu = match (choice, &steepest) {
                            (RChoice::Choice1, Some(sd)) => sd.lambda_sd.as_slice(),
                            _ => sol.lambda.as_slice(),
                        };
                        corrected_quantities(&CorrectionInputs {
                            s: &s,
                            y: &y,
                            mu,
                            vartheta: cfg.vartheta,
                            grad_current: &jac,
                        })?
                    }
                };
                for (j, gamma) in gammas.iter().enumerate() {
                    let updated = bfgs_update(hessians.get(j), &s, gamma)?;
                    hessians.set(j, updated);
                }
                diag.d_sd_norm = d_sd_norm;
                diag
            }
            Variant::BfgsWolfe => {
                let d_next_s = descent_value(&jac_new, &s);
                for j in 0..m {
                    let updated = bfgs_wolfe_update(hessians.get(j), &s, &y[j], d_next_s, dot(&jac[j], &s))?;
                    hessians.set(j, updated);
                }
                plain_diagnostics(&s, &y)
            }
            Variant::CautiousBfgsArmijo => {
                let mut diag = plain_diagnostics(&s, &y);
                for j in 0..m {
                    let (updated, applied) =
                        cautious_update(hessians.get(j), &s, &y[j], sol.theta, cfg.epsilon_cautious);
                    if !applied {
                        diag.skipped.push(j);
                    }
                    hessians.set(j, updated);
                }
                diag
            }
        };
        if full {
            diag.psi = Some(
                hessians
                    .matrices()
                    .iter()
                    .map(psi_diagnostic)
                    .collect::<Result<Vec<_>>>()?,
            );
        }

        if let Some(rec) = record.as_mut() {
            rec.alpha = Some(step.alpha);
            rec.unit_step = step.unit_step_accepted;
            rec.trials = step.trial_count;
            rec.update = full.then_some(diag);
            rec.evals = st.ev.counts();
        }
        st.trace.extend(record);

        st.x = step.x_new;
        st.f = step.f_new;
        jac = jac_new;
        prev_lambda = Some(sol.lambda);
        st.k += 1;
    }
}

/// Diagnostics for updates that use `y_j` directly (`r ≡ 0`).
fn plain_diagnostics(s: &[f64], y: &[Vec<f64>]) -> UpdateDiagnostics {
    let s_norm = norm(s);
    let ss = s_norm * s_norm;
    UpdateDiagnostics {
        eta: y.iter().map(|yj| dot(yj, s) / ss).collect(),
        r: vec![0.0; y.len()],
        gamma_dot_s: y.iter().map(|yj| dot(yj, s)).collect(),
        s_norm,
        ..Default::default()
    }
}

/// Seed used for start `index` of a multistart batch seeded with `seed`.
pub fn start_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// How a batch of independent runs is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Fan out over the rayon pool; falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
}

/// Maps `f` over `items` preserving order, in parallel when requested and available.
pub fn map_indexed<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// One run per seeded start; output order follows the start index.
pub fn run_multistart(p: &Problem, n_starts: usize, seed: u64, cfg: &SolverConfig) -> Result<Vec<RunResult>> {
    run_multistart_with(p, n_starts, seed, cfg, Execution::default())
}

pub fn run_multistart_with(
    p: &Problem,
    n_starts: usize,
    seed: u64,
    cfg: &SolverConfig,
    exec: Execution,
) -> Result<Vec<RunResult>> {
    if n_starts == 0 {
        return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
    }
    cfg.validate()?;
    let starts: Vec<Vec<f64>> = (0..n_starts).map(|i| random_start(p, start_seed(seed, i))).collect();
    map_indexed(&starts, exec, |x0| run(p, x0, cfg)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{find, jos1, scalar_quadratic};

    #[test]
    fn scalar_quadratic_one_newton_step() {
        let p = scalar_quadratic(1);
        let cfg = SolverConfig {
            trace_level: TraceLevel::Iterations,
            ..Default::default()
        };
        let r = run(&p, &[1.0], &cfg).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.x[0].abs() <= 1e-6);
        assert!(r.iterations <= 10);
        assert_eq!(r.trace[0].alpha, Some(1.0));
        assert_eq!(r.trace[0].d, vec![-1.0]);
        assert_eq!(r.trace[1].x, vec![0.0]);
    }

    #[test]
    fn jos1_reaches_pareto_segment() {
        let p = jos1(2);
        let r = run(&p, &[5.0, 5.0], &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.theta.abs() <= 7.45e-8);
        // Pareto set: x₁ = x₂ ∈ [0, 2].
        let t = (0.5 * (r.x[0] + r.x[1])).clamp(0.0, 2.0);
        let dist = ((r.x[0] - t).powi(2) + (r.x[1] - t).powi(2)).sqrt();
        assert!(dist <= 1e-5, "{:?}", r.x);
    }

    #[test]
    fn critical_start_stops_immediately() {
        let p = jos1(2);
        let r = run(&p, &[1.0, 1.0], &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.evals.f_evals, 1);
    }

    #[test]
    fn max_iters_zero() {
        let p = jos1(2);
        let cfg = SolverConfig {
            max_iters: 0,
            ..Default::default()
        };
        let r = run(&p, &[5.0, -3.0], &cfg).unwrap();
        assert_eq!(r.status, Status::MaxIters);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn bad_config_and_dimensions() {
        let p = jos1(2);
        let cfg = SolverConfig {
            rho: 0.6,
            ..Default::default()
        };
        assert!(matches!(run(&p, &[0.0, 0.0], &cfg), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            run(&p, &[0.0], &SolverConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let cfg = SolverConfig {
            vartheta: 2.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("newton".parse::<Variant>().is_err());
    }

    #[test]
    fn multistart_single_start_matches_run() {
        let p = find("BK1").unwrap();
        let cfg = SolverConfig::default();
        let batch = run_multistart(p, 1, 42, &cfg).unwrap();
        let single = run(p, &random_start(p, 42), &cfg).unwrap();
        assert_eq!(batch[0].x, single.x);
        assert_eq!(batch[0].status, single.status);
    }

    #[test]
    fn multistart_is_deterministic_across_schedules() {
        let p = find("SLCDT1").unwrap();
        let cfg = SolverConfig::default();
        let a = run_multistart_with(p, 8, 7, &cfg, Execution::Parallel).unwrap();
        let b = run_multistart_with(p, 8, 7, &cfg, Execution::Sequential).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.status, rb.status);
            assert_eq!(ra.f_x, rb.f_x);
            assert_eq!(ra.iterations, rb.iterations);
        }
    }
}
