//! Benchmark sweeps and the on-disk results bundle.
//!
//! Layout of a bundle directory:
//!
//! ```text
//! manifest.json                 experiment spec, crate version, conventions
//! runs.csv                      one row per (problem, solver, start)
//! fronts/<problem>/<solver>.csv nondominated final values of converged runs
//! metrics/{purity,gamma,delta}.csv, metrics/metrics.json
//! profiles/{time,evals}.csv, profiles/{time,evals}.json
//! ```
//!
//! Reals are written with 17 significant digits, so reading a file back
//! reproduces the in-memory tables exactly. Everything except the
//! `wall_time` column of `runs.csv` and the `time` profiles is a pure
//! function of the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    performance_profile, purity, spread_metrics_with, Extremes, FrontArchive, FrontPoint, ProfileCurve,
    ProfileTable, Provenance,
};
use crate::problem::{self, random_start};
use crate::solver::{map_indexed, run, start_seed, Execution, SolverConfig, Status, Variant};

pub const BUNDLE_FORMAT: &str = "moo-bfgs-bundle/1";

/// What to run: the cross product of problems, solvers and seeded starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problems: Vec<String>,
    pub solvers: Vec<Variant>,
    pub n_starts: usize,
    pub seed: u64,
    /// Base configuration; `variant` is overridden per solver.
    pub config: SolverConfig,
    /// Worker bound for the sweep; `None` uses every available core.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl ExperimentSpec {
    /// Resolves `"all"` and canonicalizes problem names against the registry.
    pub fn resolve(mut self) -> Result<Self> {
        if self.problems.iter().any(|p| p.eq_ignore_ascii_case("all")) {
            self.problems = problem::suite().iter().map(|p| p.name().to_string()).collect();
        } else {
            self.problems = self
                .problems
                .iter()
                .map(|name| problem::find(name).map(|p| p.name().to_string()))
                .collect::<Result<_>>()?;
        }
        if self.problems.is_empty() {
            return Err(Error::InvalidConfig("no problems selected".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidConfig("no solvers selected".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        self.config.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub purity_tolerance: f64,
    pub spread_extremes: String,
    pub profile_instances: String,
    pub evals_cost: String,
}

impl Manifest {
    pub fn new(spec: ExperimentSpec) -> Self {
        Self {
            format: BUNDLE_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec,
            purity_tolerance: crate::metrics::MATCH_TOLERANCE,
            spread_extremes: "per-objective minimizers of the union reference front".to_string(),
            profile_instances: "one instance per (problem, start); failure = status other than converged"
                .to_string(),
            evals_cost: "f_evals + jac_evals".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub solver: Variant,
    pub start: usize,
    pub seed: u64,
    pub status: Status,
    pub iterations: usize,
    pub f_evals: u64,
    pub jac_evals: u64,
    pub theta: f64,
    pub wall_time: f64,
    pub f: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFile {
    pub problem: String,
    pub solver: Variant,
    pub front: FrontArchive,
}

/// One metric value for a (problem, solver) pair; `None` stands for the worst value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub problem: String,
    pub solver: Variant,
    pub value: Option<f64>,
    pub flag: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTables {
    pub purity: Vec<MetricRow>,
    pub gamma: Vec<MetricRow>,
    pub delta: Vec<MetricRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub time: Vec<ProfileCurve>,
    pub evals: Vec<ProfileCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub manifest: Manifest,
    pub runs: Vec<RunSummary>,
    pub fronts: Vec<FrontFile>,
    pub metrics: MetricTables,
    pub profiles: Profiles,
}

/// Executes every run of the spec. Output order: problem, solver, start.
pub fn run_sweep(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<RunSummary>> {
    let mut tasks = Vec::new();
    for name in &spec.problems {
        let p = problem::find(name)?;
        for &solver in &spec.solvers {
            for start in 0..spec.n_starts {
                tasks.push((p, solver, start));
            }
        }
    }
    let work = |&(p, solver, start): &(&'static problem::Problem, Variant, usize)| -> Result<RunSummary> {
        let seed = start_seed(spec.seed, start);
        let cfg = SolverConfig {
            variant: solver,
            ..spec.config.clone()
        };
        let r = run(p, &random_start(p, seed), &cfg)?;
        Ok(RunSummary {
            problem: p.name().to_string(),
            solver,
            start,
            seed,
            status: r.status,
            iterations: r.iterations,
            f_evals: r.evals.f_evals,
            jac_evals: r.evals.jac_evals,
            theta: r.theta,
            wall_time: r.wall_time,
            f: r.f_x,
            x: r.x,
        })
    };
    with_jobs(spec.jobs, || map_indexed(&tasks, exec, work)).into_iter().collect()
}

#[cfg(feature = "parallel")]
fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<R: Send>(_jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// Per-(problem, solver) nondominated fronts of converged final values.
pub fn collect_fronts(spec: &ExperimentSpec, runs: &[RunSummary]) -> Vec<FrontFile> {
    let mut out = Vec::new();
    for problem in &spec.problems {
        for &solver in &spec.solvers {
            let points = runs
                .iter()
                .filter(|r| &r.problem == problem && r.solver == solver && r.status == Status::Converged)
                .map(|r| FrontPoint {
                    objectives: r.f.clone(),
                    provenance: Provenance {
                        solver: solver.name().to_string(),
                        problem: problem.clone(),
                        start: r.start,
                    },
                })
                .collect();
            out.push(FrontFile {
                problem: problem.clone(),
                solver,
                front: FrontArchive::from_points(points),
            });
        }
    }
    out
}

pub fn compute_metrics(spec: &ExperimentSpec, fronts: &[FrontFile]) -> MetricTables {
    let mut tables = MetricTables::default();
    for problem in &spec.problems {
        let instance: Vec<&FrontFile> = fronts.iter().filter(|f| &f.problem == problem).collect();
        let reference = FrontArchive::union(instance.iter().map(|f| &f.front));
        let extremes = Extremes::of(&reference).ok();
        for file in &instance {
            let row = |value: Option<f64>, flag: &str| MetricRow {
                problem: problem.clone(),
                solver: file.solver,
                value,
                flag: flag.to_string(),
            };
            match purity(&file.front, &reference) {
                Ok(v) => tables.purity.push(row(Some(v), "ok")),
                Err(_) => tables.purity.push(row(Some(0.0), "empty-front")),
            }
            match extremes.as_ref().map(|e| spread_metrics_with(&file.front, e)) {
                Some(Ok(s)) => {
                    tables.gamma.push(row(Some(s.gamma), "ok"));
                    tables.delta.push(row(Some(s.delta), "ok"));
                }
                _ => {
                    tables.gamma.push(row(None, "degenerate-front"));
                    tables.delta.push(row(None, "degenerate-front"));
                }
            }
        }
    }
    tables
}

pub fn compute_profiles(spec: &ExperimentSpec, runs: &[RunSummary]) -> Profiles {
    let mut index: BTreeMap<(&str, Variant, usize), &RunSummary> = BTreeMap::new();
    for r in runs {
        index.insert((r.problem.as_str(), r.solver, r.start), r);
    }
    let solvers: Vec<String> = spec.solvers.iter().map(|s| s.name().to_string()).collect();
    let mut instances = Vec::new();
    let (mut time, mut evals) = (Vec::new(), Vec::new());
    for problem in &spec.problems {
        for start in 0..spec.n_starts {
            instances.push(format!("{problem}#{start}"));
            let cell = |cost: fn(&RunSummary) -> f64| -> Vec<Option<f64>> {
                spec.solvers
                    .iter()
                    .map(|&s| {
                        index
                            .get(&(problem.as_str(), s, start))
                            .filter(|r| r.status == Status::Converged)
                            .map(|r| cost(r))
                    })
                    .collect()
            };
            time.push(cell(|r| r.wall_time.max(1e-9)));
            evals.push(cell(|r| (r.f_evals + r.jac_evals) as f64));
        }
    }
    let table = |cost| ProfileTable {
        solvers: solvers.clone(),
        instances: instances.clone(),
        cost,
    };
    Profiles {
        time: performance_profile(&table(time)),
        evals: performance_profile(&table(evals)),
    }
}

/// Runs the full sweep and writes the bundle to `out`; the manifest is written first.
pub fn run_benchmark(spec: ExperimentSpec, out: &Path, exec: Execution) -> Result<ResultsBundle> {
    let spec = spec.resolve()?;
    let manifest = Manifest::new(spec.clone());
    fs::create_dir_all(out)?;
    write_json(&out.join("manifest.json"), &manifest)?;

    let runs = run_sweep(&spec, exec)?;
    let fronts = collect_fronts(&spec, &runs);
    let metrics = compute_metrics(&spec, &fronts);
    let profiles = compute_profiles(&spec, &runs);
    let bundle = ResultsBundle {
        manifest,
        runs,
        fronts,
        metrics,
        profiles,
    };
    write_runs(&out.join("runs.csv"), &bundle.runs)?;
    for f in &bundle.fronts {
        write_front(&front_path(out, &f.problem, f.solver), f)?;
    }
    write_metrics(out, &bundle.metrics)?;
    write_profiles(out, &bundle.profiles)?;
    Ok(bundle)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(Error::Bundle(format!("unsupported format `{}`", manifest.format)));
    }
    Ok(manifest)
}

/// Reads a complete bundle back from disk.
pub fn read_bundle(dir: &Path) -> Result<ResultsBundle> {
    let manifest = read_manifest(&dir.join("manifest.json"))?;
    let runs = read_runs(&dir.join("runs.csv"))?;
    let fronts = read_fronts(dir, &manifest.spec)?;
    let metrics = MetricTables {
        purity: read_metric(&dir.join("metrics").join("purity.csv"))?,
        gamma: read_metric(&dir.join("metrics").join("gamma.csv"))?,
        delta: read_metric(&dir.join("metrics").join("delta.csv"))?,
    };
    let profiles = Profiles {
        time: read_profile(&dir.join("profiles").join("time.csv"))?,
        evals: read_profile(&dir.join("profiles").join("evals.csv"))?,
    };
    Ok(ResultsBundle {
        manifest,
        runs,
        fronts,
        metrics,
        profiles,
    })
}

/// Recomputes metric tables and profiles from the stored runs and fronts, rewriting them.
pub fn recompute_metrics(dir: &Path) -> Result<(MetricTables, Profiles)> {
    let manifest = read_manifest(&dir.join("manifest.json"))?;
    let runs = read_runs(&dir.join("runs.csv"))?;
    let fronts = read_fronts(dir, &manifest.spec)?;
    let metrics = compute_metrics(&manifest.spec, &fronts);
    let profiles = compute_profiles(&manifest.spec, &runs);
    write_metrics(dir, &metrics)?;
    write_profiles(dir, &profiles)?;
    Ok((metrics, profiles))
}

pub fn front_path(dir: &Path, problem: &str, solver: Variant) -> PathBuf {
    dir.join("fronts").join(problem).join(format!("{}.csv", solver.name()))
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Bundle(format!("bad number `{s}`")))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(";")
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_real).collect()
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Bundle(format!("bad integer `{s}`")))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    ensure_parent(path)?;
    Ok(csv::Writer::from_path(path)?)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    Ok(csv::Reader::from_path(path)?)
}

const RUN_HEADER: [&str; 12] = [
    "problem", "solver", "start", "seed", "status", "iterations", "f_evals", "jac_evals", "theta", "wall_time", "f", "x",
];

pub fn write_runs(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RUN_HEADER)?;
    for r in runs {
        w.write_record([
            r.problem.clone(),
            r.solver.name().to_string(),
            r.start.to_string(),
            r.seed.to_string(),
            r.status.name().to_string(),
            r.iterations.to_string(),
            r.f_evals.to_string(),
            r.jac_evals.to_string(),
            fmt_real(r.theta),
            fmt_real(r.wall_time),
            fmt_list(&r.f),
            fmt_list(&r.x),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs(path: &Path) -> Result<Vec<RunSummary>> {
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != RUN_HEADER.len() {
            return Err(Error::Bundle(format!("runs.csv row has {} fields", rec.len())));
        }
        out.push(RunSummary {
            problem: rec[0].to_string(),
            solver: rec[1].parse()?,
            start: parse_int(&rec[2])?,
            seed: parse_int(&rec[3])?,
            status: rec[4].parse()?,
            iterations: parse_int(&rec[5])?,
            f_evals: parse_int(&rec[6])?,
            jac_evals: parse_int(&rec[7])?,
            theta: parse_real(&rec[8])?,
            wall_time: parse_real(&rec[9])?,
            f: parse_list(&rec[10])?,
            x: parse_list(&rec[11])?,
        });
    }
    Ok(out)
}

pub fn write_front(path: &Path, file: &FrontFile) -> Result<()> {
    let mut w = csv_writer(path)?;
    let m = problem::find(&file.problem).map(|p| p.m()).unwrap_or(file.front.objectives());
    let mut header = vec!["start".to_string()];
    header.extend((1..=m).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for p in file.front.points() {
        let mut row = vec![p.provenance.start.to_string()];
        row.extend(p.objectives.iter().map(|v| fmt_real(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_fronts(dir: &Path, spec: &ExperimentSpec) -> Result<Vec<FrontFile>> {
    let mut out = Vec::new();
    for problem in &spec.problems {
        for &solver in &spec.solvers {
            let mut rdr = csv_reader(&front_path(dir, problem, solver))?;
            let mut points = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                let objectives = rec.iter().skip(1).map(parse_real).collect::<Result<Vec<_>>>()?;
                points.push(FrontPoint {
                    objectives,
                    provenance: Provenance {
                        solver: solver.name().to_string(),
                        problem: problem.clone(),
                        start: parse_int(&rec[0])?,
                    },
                });
            }
            out.push(FrontFile {
                problem: problem.clone(),
                solver,
                front: FrontArchive::from_points(points),
            });
        }
    }
    Ok(out)
}

fn write_metric(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["problem", "solver", "value", "flag"])?;
    for r in rows {
        w.write_record([
            r.problem.as_str(),
            r.solver.name(),
            &r.value.map(fmt_real).unwrap_or_default(),
            r.flag.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_metric(path: &Path) -> Result<Vec<MetricRow>> {
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(MetricRow {
            problem: rec[0].to_string(),
            solver: rec[1].parse()?,
            value: if rec[2].is_empty() {
                None
            } else {
                Some(parse_real(&rec[2])?)
            },
            flag: rec[3].to_string(),
        });
    }
    Ok(out)
}

pub fn write_metrics(dir: &Path, tables: &MetricTables) -> Result<()> {
    let base = dir.join("metrics");
    write_metric(&base.join("purity.csv"), &tables.purity)?;
    write_metric(&base.join("gamma.csv"), &tables.gamma)?;
    write_metric(&base.join("delta.csv"), &tables.delta)?;
    write_json(&base.join("metrics.json"), tables)
}

fn write_profile(path: &Path, curves: &[ProfileCurve]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["solver", "tau", "rho"])?;
    for c in curves {
        if c.breakpoints.is_empty() {
            // Keeps solvers without any success visible in the file.
            w.write_record([c.solver.as_str(), "", ""])?;
        }
        for (tau, rho) in &c.breakpoints {
            w.write_record([c.solver.as_str(), &fmt_real(*tau), &fmt_real(*rho)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_profile(path: &Path) -> Result<Vec<ProfileCurve>> {
    let mut rdr = csv_reader(path)?;
    let mut out: Vec<ProfileCurve> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if out.last().map(|c| c.solver.as_str()) != Some(&rec[0]) {
            out.push(ProfileCurve {
                solver: rec[0].to_string(),
                breakpoints: Vec::new(),
            });
        }
        if !rec[1].is_empty() {
            let curve = out.last_mut().expect("pushed above");
            curve.breakpoints.push((parse_real(&rec[1])?, parse_real(&rec[2])?));
        }
    }
    Ok(out)
}

pub fn write_profiles(dir: &Path, profiles: &Profiles) -> Result<()> {
    let base = dir.join("profiles");
    write_profile(&base.join("time.csv"), &profiles.time)?;
    write_profile(&base.join("evals.csv"), &profiles.evals)?;
    write_json(&base.join("time.json"), &profiles.time)?;
    write_json(&base.join("evals.json"), &profiles.evals)
}
