//! Front-quality metrics and performance profiles.
//!
//! * Purity: share of a solver's nondominated points that survive in the
//!   reference front (the nondominated union over all solvers).
//! * Γ-spread: largest gap along the front, extreme gaps included.
//! * Δ-spread: `(δ₀ + δ_N + Σ|δ_i − δ̄|) / (δ₀ + δ_N + (N−1)δ̄)`.
//!
//! For two objectives the gaps are Euclidean distances between consecutive
//! points of the front sorted by `f₁`, with `δ₀`/`δ_N` measured to the
//! reference front's minimizers of `f₁` and `f₂`. For more objectives each
//! objective is sorted separately, the gaps are coordinate differences against
//! the reference's per-objective minimum and maximum, and the worst objective
//! is reported.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-component tolerance for matching points against the reference front.
pub const MATCH_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: String,
    pub problem: String,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub objectives: Vec<f64>,
    pub provenance: Provenance,
}

/// Mutually nondominated objective vectors in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontArchive {
    points: Vec<FrontPoint>,
}

/// `a` dominates `b`: no worse in every objective and better in one.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl FrontArchive {
    /// Filters `points` down to the nondominated set; exact duplicates keep
    /// the first occurrence.
    pub fn from_points(mut points: Vec<FrontPoint>) -> Self {
        // Stable sort: for equal vectors, input order is preserved.
        points.sort_by(|a, b| lex_cmp(&a.objectives, &b.objectives));
        points.dedup_by(|later, earlier| later.objectives == earlier.objectives);
        // In lexicographic order a point can only be dominated by an earlier one.
        let mut kept: Vec<FrontPoint> = Vec::with_capacity(points.len());
        for p in points {
            if !kept.iter().any(|q| dominates(&q.objectives, &p.objectives)) {
                kept.push(p);
            }
        }
        Self { points: kept }
    }

    /// Keeps every distinct point, dominated or not: a solver's raw collection.
    pub fn collected(mut points: Vec<FrontPoint>) -> Self {
        points.sort_by(|a, b| lex_cmp(&a.objectives, &b.objectives));
        points.dedup_by(|later, earlier| later.objectives == earlier.objectives);
        Self { points }
    }

    pub fn from_vectors(vectors: &[Vec<f64>]) -> Self {
        Self::from_points(
            vectors
                .iter()
                .map(|v| FrontPoint {
                    objectives: v.clone(),
                    provenance: Provenance::default(),
                })
                .collect(),
        )
    }

    /// Nondominated filter of the union of several fronts.
    pub fn union<'a>(fronts: impl IntoIterator<Item = &'a FrontArchive>) -> Self {
        Self::from_points(fronts.into_iter().flat_map(|f| f.points.iter().cloned()).collect())
    }

    pub fn points(&self) -> &[FrontPoint] {
        &self.points
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.objectives.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn objectives(&self) -> usize {
        self.points.first().map_or(0, |p| p.objectives.len())
    }

    fn contains_close(&self, v: &[f64]) -> bool {
        self.points.iter().any(|p| {
            p.objectives
                .iter()
                .zip(v)
                .all(|(a, b)| (a - b).abs() <= MATCH_TOLERANCE)
        })
    }
}

pub fn nondominated_filter(points: &[Vec<f64>]) -> FrontArchive {
    FrontArchive::from_vectors(points)
}

pub fn purity(solver_front: &FrontArchive, reference_front: &FrontArchive) -> Result<f64> {
    if solver_front.is_empty() {
        return Err(Error::EmptyFront);
    }
    let hits = solver_front
        .points
        .iter()
        .filter(|p| reference_front.contains_close(&p.objectives))
        .count();
    Ok(hits as f64 / solver_front.len() as f64)
}

/// Extreme points that bound the spread gaps, taken from a reference front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    /// For each objective `j`, the reference point minimizing `f_j` (ties: lexicographically smallest).
    pub minimizers: Vec<Vec<f64>>,
    /// Per-objective minimum and maximum over the reference.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Extremes {
    pub fn of(reference: &FrontArchive) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyFront);
        }
        let m = reference.objectives();
        let mut minimizers = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(m);
        let mut upper = Vec::with_capacity(m);
        for j in 0..m {
            let best = reference
                .points
                .iter()
                .min_by(|a, b| {
                    a.objectives[j]
                        .total_cmp(&b.objectives[j])
                        .then_with(|| lex_cmp(&a.objectives, &b.objectives))
                })
                .expect("non-empty");
            minimizers.push(best.objectives.clone());
            lower.push(best.objectives[j]);
            upper.push(
                reference
                    .points
                    .iter()
                    .map(|p| p.objectives[j])
                    .fold(f64::NEG_INFINITY, f64::max),
            );
        }
        Ok(Self { minimizers, lower, upper })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub gamma: f64,
    pub delta: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn spread_from_gaps(first: f64, interior: &[f64], last: f64) -> Spread {
    let gamma = interior.iter().copied().fold(first.max(last), f64::max);
    let mean = interior.iter().sum::<f64>() / interior.len() as f64;
    let deviation: f64 = interior.iter().map(|g| (g - mean).abs()).sum();
    let denom = first + last + interior.len() as f64 * mean;
    let delta = if denom > 0.0 {
        (first + last + deviation) / denom
    } else {
        0.0
    };
    Spread { gamma, delta }
}

/// Γ and Δ of `front`, with extreme gaps measured against `extremes`.
pub fn spread_metrics_with(front: &FrontArchive, extremes: &Extremes) -> Result<Spread> {
    if front.len() < 2 {
        return Err(Error::DegenerateFront { points: front.len() });
    }
    let m = front.objectives();
    if m == 2 {
        let mut pts = front.vectors();
        pts.sort_by(|a, b| lex_cmp(a, b));
        let interior: Vec<f64> = pts.windows(2).map(|w| distance(&w[0], &w[1])).collect();
        let first = distance(&extremes.minimizers[0], &pts[0]);
        let last = distance(&pts[pts.len() - 1], &extremes.minimizers[1]);
        return Ok(spread_from_gaps(first, &interior, last));
    }
    let mut worst = Spread {
        gamma: f64::NEG_INFINITY,
        delta: f64::NEG_INFINITY,
    };
    for j in 0..m {
        let mut values: Vec<f64> = front.points.iter().map(|p| p.objectives[j]).collect();
        values.sort_by(f64::total_cmp);
        let interior: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let first = (values[0] - extremes.lower[j]).max(0.0);
        let last = (extremes.upper[j] - values[values.len() - 1]).max(0.0);
        let s = spread_from_gaps(first, &interior, last);
        worst.gamma = worst.gamma.max(s.gamma);
        worst.delta = worst.delta.max(s.delta);
    }
    Ok(worst)
}

/// Γ and Δ of a front against its own extremes.
pub fn spread_metrics(front: &FrontArchive) -> Result<Spread> {
    spread_metrics_with(front, &Extremes::of(front)?)
}

/// Costs with `None` marking failures; rows are instances, columns solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub solvers: Vec<String>,
    pub instances: Vec<String>,
    pub cost: Vec<Vec<Option<f64>>>,
}

/// Step function `ρ_s(τ)`: `rho` holds from each `tau` breakpoint up to the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub solver: String,
    pub breakpoints: Vec<(f64, f64)>,
}

impl ProfileCurve {
    pub fn rho_at(&self, tau: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|(t, _)| *t <= tau)
            .last()
            .map_or(0.0, |(_, r)| *r)
    }
}

pub fn performance_profile(table: &ProfileTable) -> Vec<ProfileCurve> {
    let n_inst = table.instances.len().max(table.cost.len());
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); table.solvers.len()];
    for row in &table.cost {
        let best = row
            .iter()
            .flatten()
            .copied()
            .filter(|c| *c > 0.0 && c.is_finite())
            .fold(f64::INFINITY, f64::min);
        for (s, entry) in row.iter().enumerate() {
            if let Some(c) = entry.filter(|c| *c > 0.0 && c.is_finite()) {
                ratios[s].push(c / best);
            }
        }
    }
    table
        .solvers
        .iter()
        .zip(ratios)
        .map(|(name, mut r)| {
            r.sort_by(f64::total_cmp);
            let mut breakpoints: Vec<(f64, f64)> = Vec::new();
            for (i, tau) in r.iter().enumerate() {
                let rho = (i + 1) as f64 / n_inst as f64;
                match breakpoints.last_mut() {
                    Some(last) if last.0 == *tau => last.1 = rho,
                    _ => breakpoints.push((*tau, rho)),
                }
            }
            ProfileCurve {
                solver: name.clone(),
                breakpoints,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn front(v: &[[f64; 2]]) -> FrontArchive {
        FrontArchive::from_vectors(&v.iter().map(|p| p.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn filter_examples() {
        assert_eq!(front(&[[0.0, 1.0], [1.0, 0.0]]).len(), 2);
        let f = front(&[[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        assert_eq!(f.vectors(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = front(&[[0.5, 0.5], [0.5, 0.5]]);
        assert_eq!(f.len(), 1);
        // Weakly dominated along one axis.
        let f = front(&[[0.0, 1.0], [0.0, 2.0]]);
        assert_eq!(f.vectors(), vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn purity_examples() {
        let solver = front(&[[0.0, 1.0], [1.0, 0.0]]);
        let reference = front(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]);
        assert_eq!(purity(&solver, &reference).unwrap(), 1.0);

        let a = front(&[[0.0, 1.0], [2.0, 2.0]]);
        let b = front(&[[1.0, 0.0]]);
        let reference = FrontArchive::union([&a, &b]);
        assert_eq!(reference.vectors(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        // (2,2) is already dominated inside a, so a's own front is {(0,1)}.
        assert_eq!(purity(&a, &reference).unwrap(), 1.0);
        let raw_a = FrontArchive::collected(
            [[0.0, 1.0], [2.0, 2.0]]
                .iter()
                .map(|v| FrontPoint {
                    objectives: v.to_vec(),
                    provenance: Provenance::default(),
                })
                .collect(),
        );
        assert_eq!(purity(&raw_a, &reference).unwrap(), 0.5);
        assert_eq!(purity(&reference, &reference).unwrap(), 1.0);
        assert!(matches!(purity(&FrontArchive::default(), &reference), Err(Error::EmptyFront)));
    }

    #[test]
    fn spread_examples() {
        let even = front(&[[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]]);
        let s = spread_metrics(&even).unwrap();
        assert_eq!(s.delta, 0.0);
        assert!((s.gamma - 0.5f64.sqrt()).abs() < 1e-15);

        let uneven = front(&[[0.0, 1.0], [0.9, 0.1], [1.0, 0.0]]);
        let s = spread_metrics(&uneven).unwrap();
        let g1 = (0.81f64 + 0.81).sqrt();
        let g2 = (0.01f64 + 0.01).sqrt();
        assert_eq!(s.gamma, g1);
        let mean = 0.5 * (g1 + g2);
        let expected_delta = ((g1 - mean).abs() + (g2 - mean).abs()) / (2.0 * mean);
        assert!((s.delta - expected_delta).abs() < 1e-15);

        let pair = front(&[[0.0, 1.0], [1.0, 0.0]]);
        let s = spread_metrics(&pair).unwrap();
        assert_eq!(s.gamma, 2f64.sqrt());
        assert!(matches!(
            spread_metrics(&front(&[[0.0, 1.0]])),
            Err(Error::DegenerateFront { points: 1 })
        ));
    }

    #[test]
    fn spread_with_external_extremes() {
        let reference = front(&[[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]);
        let solver = front(&[[1.0, 1.0], [2.0, 0.0]]);
        let ext = Extremes::of(&reference).unwrap();
        let s = spread_metrics_with(&solver, &ext).unwrap();
        // δ₀ = |(0,2) − (1,1)|, δ_N = 0, one interior gap of the same length:
        // Δ = δ₀ / (δ₀ + δ̄) = 1/2.
        let g = 2f64.sqrt();
        assert!((s.gamma - g).abs() < 1e-15);
        assert!((s.delta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_objective_spread_uses_coordinates() {
        let f = FrontArchive::from_vectors(&[vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 0.5], vec![0.5, 0.5, 0.0]]);
        let s = spread_metrics(&f).unwrap();
        assert_eq!(s.gamma, 0.5);
    }

    #[test]
    fn profile_examples() {
        let table = ProfileTable {
            solvers: vec!["A".into(), "B".into()],
            instances: vec!["p1".into(), "p2".into()],
            cost: vec![vec![Some(1.0), Some(2.0)], vec![Some(4.0), Some(2.0)]],
        };
        let curves = performance_profile(&table);
        assert_eq!(curves[0].rho_at(1.0), 0.5);
        assert_eq!(curves[1].rho_at(1.0), 0.5);
        assert_eq!(curves[0].rho_at(2.0), 1.0);
        assert_eq!(curves[1].rho_at(2.0), 1.0);
        assert_eq!(curves[0].rho_at(0.5), 0.0);

        let single = ProfileTable {
            solvers: vec!["A".into()],
            instances: vec!["p1".into(), "p2".into(), "p3".into()],
            cost: vec![vec![Some(3.0)], vec![None], vec![Some(1.0)]],
        };
        let c = performance_profile(&single);
        assert!((c[0].rho_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[0].rho_at(f64::INFINITY) - 2.0 / 3.0).abs() < 1e-15);

        let equal = ProfileTable {
            solvers: vec!["A".into(), "B".into()],
            instances: vec!["p".into()],
            cost: vec![vec![Some(5.0), Some(5.0)]],
        };
        assert!(performance_profile(&equal).iter().all(|c| c.rho_at(1.0) == 1.0));
    }
}
