//! Vector-valued objectives, evaluation counting, seeded starting points and
//! the built-in benchmark suite.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::all_finite;
use crate::rng::SplitMix64;

/// Rows are objective gradients: `jac[j] = ∇F_j(x)`.
pub type Jacobian = Vec<Vec<f64>>;

type ValueFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&[f64]) -> Jacobian + Send + Sync>;

/// Static description of a problem; this is what `list-problems` prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub convex: bool,
    /// Every objective strongly convex; used to select runs for local-rate checks.
    pub strongly_convex: bool,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub struct Problem {
    meta: ProblemMeta,
    value: ValueFn,
    jacobian: JacobianFn,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("meta", &self.meta).finish()
    }
}

impl Problem {
    pub fn new(
        meta: ProblemMeta,
        value: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> Jacobian + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(meta.lower.len(), meta.n, "lower bound length must equal n");
        assert_eq!(meta.upper.len(), meta.n, "upper bound length must equal n");
        Self {
            meta,
            value: Box::new(value),
            jacobian: Box::new(jacobian),
        }
    }

    pub fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn m(&self) -> usize {
        self.meta.m
    }

    /// Uncounted, unchecked objective values.
    pub fn value_raw(&self, x: &[f64]) -> Vec<f64> {
        (self.value)(x)
    }

    /// Uncounted, unchecked Jacobian.
    pub fn jacobian_raw(&self, x: &[f64]) -> Jacobian {
        (self.jacobian)(x)
    }
}

/// Evaluation counts for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounter {
    pub f_evals: u64,
    pub jac_evals: u64,
}

impl EvalCounter {
    pub fn total(&self) -> u64 {
        self.f_evals + self.jac_evals
    }
}

/// A problem paired with the counters of the run that owns it.
#[derive(Debug)]
pub struct Evaluator<'p> {
    problem: &'p Problem,
    counter: EvalCounter,
}

impl<'p> Evaluator<'p> {
    pub fn new(problem: &'p Problem) -> Self {
        Self {
            problem,
            counter: EvalCounter::default(),
        }
    }

    pub fn problem(&self) -> &'p Problem {
        self.problem
    }

    pub fn counts(&self) -> EvalCounter {
        self.counter
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.problem.n() {
            return Err(Error::DimensionMismatch {
                expected: self.problem.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        self.counter.f_evals += 1;
        let f = self.problem.value_raw(x);
        debug_assert_eq!(f.len(), self.problem.m());
        if !all_finite(&f) {
            return Err(Error::NonFiniteValue { what: "objective" });
        }
        Ok(f)
    }

    pub fn jacobian(&mut self, x: &[f64]) -> Result<Jacobian> {
        self.check_len(x)?;
        self.counter.jac_evals += 1;
        let jac = self.problem.jacobian_raw(x);
        debug_assert_eq!(jac.len(), self.problem.m());
        if !jac.iter().all(|g| all_finite(g)) {
            return Err(Error::NonFiniteValue { what: "jacobian" });
        }
        Ok(jac)
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<(Vec<f64>, Jacobian)> {
        let f = self.value(x)?;
        let jac = self.jacobian(x)?;
        Ok((f, jac))
    }
}

/// Evaluates `F(x)` and `JF(x)`, bumping `counter`.
pub fn evaluate(p: &Problem, x: &[f64], counter: &mut EvalCounter) -> Result<(Vec<f64>, Jacobian)> {
    let mut ev = Evaluator {
        problem: p,
        counter: *counter,
    };
    let out = ev.evaluate(x);
    *counter = ev.counter;
    out
}

/// Uniform sample from the problem's start box using [`SplitMix64`] seeded with `seed`.
pub fn random_start(p: &Problem, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    p.meta
        .lower
        .iter()
        .zip(&p.meta.upper)
        .map(|(lo, hi)| lo + (hi - lo) * rng.next_f64())
        .collect()
}

/// Central-difference Jacobian with step `h`, used to check hand-written gradients.
pub fn finite_difference_jacobian(p: &Problem, x: &[f64], h: f64) -> Jacobian {
    let m = p.m();
    let mut jac = vec![vec![0.0; p.n()]; m];
    let mut xp = x.to_vec();
    for i in 0..p.n() {
        xp[i] = x[i] + h;
        let fp = p.value_raw(&xp);
        xp[i] = x[i] - h;
        let fm = p.value_raw(&xp);
        xp[i] = x[i];
        for j in 0..m {
            jac[j][i] = (fp[j] - fm[j]) / (2.0 * h);
        }
    }
    jac
}

fn meta(name: &str, n: usize, m: usize, convex: bool, strongly_convex: bool, lo: f64, hi: f64) -> ProblemMeta {
    ProblemMeta {
        name: name.to_string(),
        n,
        m,
        convex,
        strongly_convex,
        lower: vec![lo; n],
        upper: vec![hi; n],
    }
}

pub fn jos1(n: usize) -> Problem {
    let scale = 1.0 / n as f64;
    Problem::new(
        meta("JOS1", n, 2, true, true, -100.0, 100.0),
        move |x| {
            vec![
                scale * x.iter().map(|v| v * v).sum::<f64>(),
                scale * x.iter().map(|v| (v - 2.0).powi(2)).sum::<f64>(),
            ]
        },
        move |x| {
            vec![
                x.iter().map(|v| 2.0 * scale * v).collect(),
                x.iter().map(|v| 2.0 * scale * (v - 2.0)).collect(),
            ]
        },
    )
}

fn sp1() -> Problem {
    Problem::new(
        meta("SP1", 2, 2, true, true, -100.0, 100.0),
        |x| {
            let q = x[0] - x[1];
            vec![(x[0] - 1.0).powi(2) + q * q, (x[1] - 3.0).powi(2) + q * q]
        },
        |x| {
            let q = x[0] - x[1];
            vec![
                vec![2.0 * (x[0] - 1.0) + 2.0 * q, -2.0 * q],
                vec![2.0 * q, 2.0 * (x[1] - 3.0) - 2.0 * q],
            ]
        },
    )
}

fn ap2() -> Problem {
    Problem::new(
        meta("AP2", 1, 2, true, true, -100.0, 100.0),
        |x| vec![x[0] * x[0] - 4.0, (x[0] - 1.0).powi(2)],
        |x| vec![vec![2.0 * x[0]], vec![2.0 * (x[0] - 1.0)]],
    )
}

fn bk1() -> Problem {
    Problem::new(
        meta("BK1", 2, 2, true, true, -5.0, 10.0),
        |x| {
            vec![
                x[0] * x[0] + x[1] * x[1],
                (x[0] - 5.0).powi(2) + (x[1] - 5.0).powi(2),
            ]
        },
        |x| {
            vec![
                vec![2.0 * x[0], 2.0 * x[1]],
                vec![2.0 * (x[0] - 5.0), 2.0 * (x[1] - 5.0)],
            ]
        },
    )
}

fn mop2() -> Problem {
    let n = 2;
    let c = 1.0 / (n as f64).sqrt();
    Problem::new(
        meta("MOP2", n, 2, false, false, -4.0, 4.0),
        move |x| {
            let a: f64 = x.iter().map(|v| (v - c).powi(2)).sum();
            let b: f64 = x.iter().map(|v| (v + c).powi(2)).sum();
            vec![1.0 - (-a).exp(), 1.0 - (-b).exp()]
        },
        move |x| {
            let ea = (-x.iter().map(|v| (v - c).powi(2)).sum::<f64>()).exp();
            let eb = (-x.iter().map(|v| (v + c).powi(2)).sum::<f64>()).exp();
            vec![
                x.iter().map(|v| 2.0 * (v - c) * ea).collect(),
                x.iter().map(|v| 2.0 * (v + c) * eb).collect(),
            ]
        },
    )
}

fn dgo2() -> Problem {
    Problem::new(
        meta("DGO2", 1, 2, true, true, -9.0, 9.0),
        |x| vec![x[0] * x[0], 9.0 - (81.0 - x[0] * x[0]).sqrt()],
        |x| vec![vec![2.0 * x[0]], vec![x[0] / (81.0 - x[0] * x[0]).sqrt()]],
    )
}

fn ff1() -> Problem {
    Problem::new(
        meta("FF1", 2, 2, false, false, -1.0, 1.0),
        |x| {
            let a = (x[0] - 1.0).powi(2) + (x[1] + 1.0).powi(2);
            let b = (x[0] + 1.0).powi(2) + (x[1] - 1.0).powi(2);
            vec![1.0 - (-a).exp(), 1.0 - (-b).exp()]
        },
        |x| {
            let ea = (-((x[0] - 1.0).powi(2) + (x[1] + 1.0).powi(2))).exp();
            let eb = (-((x[0] + 1.0).powi(2) + (x[1] - 1.0).powi(2))).exp();
            vec![
                vec![2.0 * (x[0] - 1.0) * ea, 2.0 * (x[1] + 1.0) * ea],
                vec![2.0 * (x[0] + 1.0) * eb, 2.0 * (x[1] - 1.0) * eb],
            ]
        },
    )
}

fn hil1() -> Problem {
    const DEG: f64 = 2.0 * PI / 360.0;
    fn parts(x: &[f64]) -> (f64, f64, [f64; 2], [f64; 2]) {
        let (t1, t2) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        let a = DEG * (45.0 + 40.0 * t1.sin() + 25.0 * t2.sin());
        let b = 1.0 + 0.5 * t1.cos();
        let da = [DEG * 40.0 * 2.0 * PI * t1.cos(), DEG * 25.0 * 2.0 * PI * t2.cos()];
        let db = [-0.5 * 2.0 * PI * t1.sin(), 0.0];
        (a, b, da, db)
    }
    Problem::new(
        meta("Hil1", 2, 2, false, false, 0.0, 1.0),
        |x| {
            let (a, b, _, _) = parts(x);
            vec![a.cos() * b, a.sin() * b]
        },
        |x| {
            let (a, b, da, db) = parts(x);
            let (s, c) = a.sin_cos();
            vec![
                (0..2).map(|i| -s * b * da[i] + c * db[i]).collect(),
                (0..2).map(|i| c * b * da[i] + s * db[i]).collect(),
            ]
        },
    )
}

fn lov1() -> Problem {
    Problem::new(
        meta("Lov1", 2, 2, true, true, -10.0, 10.0),
        |x| {
            vec![
                1.05 * x[0] * x[0] + 0.98 * x[1] * x[1],
                0.99 * (x[0] - 3.0).powi(2) + 1.03 * (x[1] - 2.5).powi(2),
            ]
        },
        |x| {
            vec![
                vec![2.1 * x[0], 1.96 * x[1]],
                vec![1.98 * (x[0] - 3.0), 2.06 * (x[1] - 2.5)],
            ]
        },
    )
}

fn mmr2() -> Problem {
    fn g(t: f64) -> (f64, f64) {
        let u = (t - 0.2) / 0.04;
        let w = (t - 0.6) / 0.4;
        let e1 = (-u * u).exp();
        let e2 = 0.8 * (-w * w).exp();
        (2.0 - e1 - e2, 2.0 * u / 0.04 * e1 + 2.0 * w / 0.4 * e2)
    }
    let mut m = meta("MMR2", 2, 2, false, false, 0.0, 1.0);
    m.lower[0] = 0.1;
    Problem::new(
        m,
        |x| vec![x[0], g(x[1]).0 / x[0]],
        |x| {
            let (gv, dg) = g(x[1]);
            vec![vec![1.0, 0.0], vec![-gv / (x[0] * x[0]), dg / x[0]]]
        },
    )
}

fn slcdt1() -> Problem {
    const LAMBDA: f64 = 0.85;
    Problem::new(
        meta("SLCDT1", 2, 2, false, false, -1.5, 1.5),
        |x| {
            let (p, q) = (x[0] + x[1], x[0] - x[1]);
            let base = (1.0 + p * p).sqrt() + (1.0 + q * q).sqrt();
            let bump = LAMBDA * (-q * q).exp();
            vec![0.5 * (base + q) + bump, 0.5 * (base - q) + bump]
        },
        |x| {
            let (p, q) = (x[0] + x[1], x[0] - x[1]);
            let pa = p / (1.0 + p * p).sqrt();
            let qc = q / (1.0 + q * q).sqrt();
            let e = 2.0 * q * LAMBDA * (-q * q).exp();
            vec![
                vec![0.5 * (pa + qc + 1.0) - e, 0.5 * (pa - qc - 1.0) + e],
                vec![0.5 * (pa + qc - 1.0) - e, 0.5 * (pa - qc + 1.0) + e],
            ]
        },
    )
}

fn toi4() -> Problem {
    Problem::new(
        meta("Toi4", 4, 2, true, false, -2.0, 5.0),
        |x| {
            vec![
                x[0] * x[0] + x[1] * x[1] + 1.0,
                0.5 * ((x[0] - x[1]).powi(2) + (x[2] - x[3]).powi(2)) + 1.0,
            ]
        },
        |x| {
            let (a, b) = (x[0] - x[1], x[2] - x[3]);
            vec![vec![2.0 * x[0], 2.0 * x[1], 0.0, 0.0], vec![a, -a, b, -b]]
        },
    )
}

/// `F(x) = ½ Σ x_i²`; the trivial scalar regression problem.
pub fn scalar_quadratic(n: usize) -> Problem {
    Problem::new(
        meta("ScalarQuadratic", n, 1, true, true, -5.0, 5.0),
        |x| vec![0.5 * x.iter().map(|v| v * v).sum::<f64>()],
        |x| vec![x.to_vec()],
    )
}

/// `F(x) = ½ xᵀAx − bᵀx` with a fixed ill-scaled tridiagonal `A`, n = 4.
pub fn convex_quadratic() -> Problem {
    const DIAG: [f64; 4] = [4.0, 3.0, 2.0, 10.0];
    const OFF: f64 = 0.5;
    const B: [f64; 4] = [1.0, -2.0, 0.5, 3.0];
    fn apply(x: &[f64]) -> Vec<f64> {
        (0..4)
            .map(|i| {
                let mut v = DIAG[i] * x[i];
                if i > 0 {
                    v += OFF * x[i - 1];
                }
                if i < 3 {
                    v += OFF * x[i + 1];
                }
                v
            })
            .collect()
    }
    Problem::new(
        meta("ConvexQuadratic", 4, 1, true, true, -5.0, 5.0),
        |x| {
            let ax = apply(x);
            vec![(0..4).map(|i| 0.5 * x[i] * ax[i] - B[i] * x[i]).sum()]
        },
        |x| vec![apply(x).iter().zip(B).map(|(a, b)| a - b).collect()],
    )
}

pub fn rosenbrock() -> Problem {
    Problem::new(
        meta("Rosenbrock", 2, 1, false, false, -2.0, 2.0),
        |x| vec![100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)],
        |x| {
            let t = x[1] - x[0] * x[0];
            vec![vec![-400.0 * x[0] * t - 2.0 * (1.0 - x[0]), 200.0 * t]]
        },
    )
}

/// The registered benchmark suite, in canonical order.
pub fn suite() -> &'static [Problem] {
    static SUITE: OnceLock<Vec<Problem>> = OnceLock::new();
    SUITE.get_or_init(|| {
        vec![
            jos1(2),
            sp1(),
            ap2(),
            bk1(),
            mop2(),
            dgo2(),
            ff1(),
            hil1(),
            lov1(),
            mmr2(),
            slcdt1(),
            toi4(),
        ]
    })
}

/// Looks up a suite problem by name, ignoring ASCII case.
pub fn find(name: &str) -> Result<&'static Problem> {
    suite()
        .iter()
        .find(|p| p.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jos1_at_origin() {
        let p = jos1(2);
        let mut c = EvalCounter::default();
        let (f, jac) = evaluate(&p, &[0.0, 0.0], &mut c).unwrap();
        assert_eq!(f, vec![0.0, 4.0]);
        assert_eq!(jac[0], vec![0.0, 0.0]);
        assert_eq!(c, EvalCounter { f_evals: 1, jac_evals: 1 });
    }

    #[test]
    fn scalar_quadratic_by_hand() {
        let p = scalar_quadratic(1);
        let mut c = EvalCounter::default();
        let (f, jac) = evaluate(&p, &[1.0], &mut c).unwrap();
        assert_eq!(f, vec![0.5]);
        assert_eq!(jac, vec![vec![1.0]]);
    }

    #[test]
    fn outside_domain_is_non_finite() {
        let p = find("DGO2").unwrap();
        let mut ev = Evaluator::new(p);
        assert!(matches!(ev.value(&[10.0]), Err(Error::NonFiniteValue { .. })));
        assert!(matches!(ev.value(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(ev.counts().f_evals, 1);
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(suite().len(), 12);
        assert_eq!(find("jos1").unwrap().name(), "JOS1");
        assert!(matches!(find("ZDT1"), Err(Error::UnknownProblem(_))));
        for p in suite() {
            assert_eq!(p.meta().lower.len(), p.n());
        }
    }

    #[test]
    fn random_start_contract() {
        let mut m = meta("Zero", 3, 2, true, true, 0.0, 0.0);
        m.lower = vec![0.0; 3];
        let p = Problem::new(m, |_| vec![0.0, 0.0], |_| vec![vec![0.0; 3]; 2]);
        assert_eq!(random_start(&p, 17), vec![0.0; 3]);

        let q = find("BK1").unwrap();
        assert_eq!(random_start(q, 5), random_start(q, 5));
        assert_ne!(random_start(q, 5), random_start(q, 6));
    }

    #[test]
    fn random_start_is_roughly_uniform() {
        let p = Problem::new(meta("Unit", 2, 2, true, true, 0.0, 1.0), |_| vec![0.0, 0.0], |_| {
            vec![vec![0.0; 2]; 2]
        });
        let samples = 10_000;
        let mut mean = [0.0; 2];
        for seed in 0..samples {
            let x = random_start(&p, seed);
            for i in 0..2 {
                assert!((0.0..1.0).contains(&x[i]));
                mean[i] += x[i] / samples as f64;
            }
        }
        for v in mean {
            assert!((0.45..=0.55).contains(&v), "mean {v}");
        }
    }
}
