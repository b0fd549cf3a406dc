//! Command-line runner for the multiobjective BFGS solvers.
//!
//! ```text
//! moo-bfgs list-problems [--format text|json]
//! moo-bfgs solve --problem NAME --solver NAME [--seed S | --x0 a,b,..] [solver flags]
//!                [--config FILE.toml] [--trace FILE.jsonl] [--output text|json]
//! moo-bfgs benchmark [--problems all|A,B] [--solvers all|A,B] [--starts N] [--seed S]
//!                    [--jobs J] [--config FILE.toml] --out DIR
//! moo-bfgs benchmark --manifest DIR/manifest.json --out DIR2
//! moo-bfgs metrics --dir DIR
//! ```
//!
//! Solver parameters are resolved as built-in defaults, then the TOML config
//! file (keys of `SolverConfig`, e.g. `rho = 1e-4`), then flags. `--seed`
//! falls back to `MOO_BFGS_SEED`, then 0.
//!
//! Exit codes: 0 converged (or success for non-solve commands), 1 usage or
//! configuration error, 2 iteration limit reached, 3 numerical failure.
//!
//! # Bundle schema
//!
//! All CSV files have a header row; reals carry 17 significant digits.
//!
//! * `runs.csv`: `problem,solver,start,seed,status,iterations,f_evals,jac_evals,theta,wall_time,f,x`
//!   where `f` and `x` are `;`-separated vectors.
//! * `fronts/<problem>/<solver>.csv`: `start,f1,..,fm`, nondominated final
//!   values of converged runs, sorted lexicographically.
//! * `metrics/{purity,gamma,delta}.csv`: `problem,solver,value,flag`. Flag is
//!   `ok`, `empty-front` (purity 0) or `degenerate-front` (empty value, worst
//!   possible Γ/Δ). `metrics/metrics.json` holds all three tables.
//! * `profiles/{time,evals}.csv`: `solver,tau,rho` breakpoints of the step
//!   function ρ_s(τ); a solver with no successes has one row with empty
//!   `tau,rho`. The JSON twins hold the same curves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use moo_bfgs::experiment::{self, ExperimentSpec, Manifest};
use moo_bfgs::problem::{self, random_start};
use moo_bfgs::solver::{Execution, RChoice, SolverConfig, Status, TraceLevel, Variant};
use moo_bfgs::{Error, Result};

#[derive(Parser)]
#[command(name = "moo-bfgs", version, about = "Quasi-Newton solvers for multiobjective optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in test problems.
    ListProblems {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run one solver from one starting point.
    Solve(SolveArgs),
    /// Sweep problems × solvers × starts and write a results bundle.
    Benchmark(BenchArgs),
    /// Recompute metric tables and profiles of an existing bundle.
    Metrics {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum RChoiceArg {
    Choice1,
    Choice2,
    Zero,
}

impl From<RChoiceArg> for RChoice {
    fn from(r: RChoiceArg) -> Self {
        match r {
            RChoiceArg::Choice1 => RChoice::Choice1,
            RChoiceArg::Choice2 => RChoice::Choice2,
            RChoiceArg::Zero => RChoice::Zero,
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file with `SolverConfig` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Sufficient-decrease constant, in (0, 1/2).
    #[arg(long)]
    rho: Option<f64>,
    /// Curvature constant, in (rho, 1).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    vartheta: Option<f64>,
    /// Cautious-update threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Stop once |θ| falls to this value.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    r_choice: Option<RChoiceArg>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(path) => toml::from_str(&std::fs::read_to_string(path)?)?,
            None => SolverConfig::default(),
        };
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.vartheta {
            cfg.vartheta = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon_cautious = v;
        }
        if let Some(v) = self.tol {
            cfg.theta_tol = v;
        }
        if let Some(v) = self.r_choice {
            cfg.r_choice = v.into();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    solver: String,
    #[arg(long, env = "MOO_BFGS_SEED", conflicts_with = "x0")]
    seed: Option<u64>,
    /// Explicit starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write one JSON object per iteration to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    output: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "all")]
    problems: String,
    #[arg(long, default_value = "all")]
    solvers: String,
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, env = "MOO_BFGS_SEED", default_value_t = 0)]
    seed: u64,
    /// Upper bound on worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Rerun the experiment recorded in an existing manifest; other sweep flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

fn parse_solvers(s: &str) -> Result<Vec<Variant>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Variant::ALL.to_vec());
    }
    parse_list(s).iter().map(|t| t.parse()).collect()
}

fn list_problems(format: Format) -> Result<ExitCode> {
    let metas: Vec<_> = problem::suite().iter().map(|p| p.meta().clone()).collect();
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&metas)?),
        Format::Text => {
            println!("{:<8} {:>3} {:>3}  {:<16}", "name", "n", "m", "convexity");
            for m in &metas {
                let convexity = match (m.strongly_convex, m.convex) {
                    (true, _) => "strongly convex",
                    (false, true) => "convex",
                    _ => "nonconvex",
                };
                println!("{:<8} {:>3} {:>3}  {:<16}", m.name, m.n, m.m, convexity);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let p = problem::find(&args.problem)?;
    let mut cfg = args.config.resolve()?;
    cfg.variant = args.solver.parse()?;
    if args.trace.is_some() {
        cfg.trace_level = TraceLevel::Full;
    }
    let x0 = match args.x0 {
        Some(x0) => x0,
        None => random_start(p, args.seed.unwrap_or(0)),
    };
    let mut result = moo_bfgs::run(p, &x0, &cfg)?;

    if let Some(path) = &args.trace {
        let mut w = BufWriter::new(File::create(path)?);
        for rec in &result.trace {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        result.trace.clear();
    }

    match args.output {
        Format::Json => println!("{}", serde_json::to_string_pretty(&result)?),
        Format::Text => {
            println!("problem     {}", result.problem);
            println!("solver      {}", result.variant);
            println!("status      {}", result.status);
            println!("iterations  {}", result.iterations);
            println!("theta       {:.6e}", result.theta);
            println!("x           {}", fmt_vec(&result.x));
            println!("F(x)        {}", fmt_vec(&result.f_x));
            println!("evals       f={} jac={}", result.evals.f_evals, result.evals.jac_evals);
            println!("wall_time   {:.6}s", result.wall_time);
            if let Some(msg) = &result.message {
                println!("message     {msg}");
            }
        }
    }
    Ok(match result.status {
        Status::Converged => ExitCode::SUCCESS,
        Status::MaxIters => ExitCode::from(2),
        _ => ExitCode::from(3),
    })
}

fn benchmark(args: BenchArgs) -> Result<ExitCode> {
    let spec = match &args.manifest {
        Some(path) => experiment::read_manifest(path)?.spec,
        None => ExperimentSpec {
            problems: parse_list(&args.problems),
            solvers: parse_solvers(&args.solvers)?,
            n_starts: args.starts,
            seed: args.seed,
            config: args.config.resolve()?,
            jobs: args.jobs,
        },
    };
    let bundle = experiment::run_benchmark(spec, &args.out, Execution::Parallel)?;
    summarize(&bundle.manifest, &bundle.runs);
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn summarize(manifest: &Manifest, runs: &[experiment::RunSummary]) {
    for &solver in &manifest.spec.solvers {
        let mine: Vec<_> = runs.iter().filter(|r| r.solver == solver).collect();
        let ok = mine.iter().filter(|r| r.status == Status::Converged).count();
        println!("{:<22} converged {ok}/{}", solver.name(), mine.len());
    }
}

fn metrics(dir: PathBuf) -> Result<ExitCode> {
    let (tables, _) = experiment::recompute_metrics(&dir)?;
    println!("{:<8} {:<22} {:>10} {:>12} {:>12}", "problem", "solver", "purity", "gamma", "delta");
    for ((p, g), d) in tables.purity.iter().zip(&tables.gamma).zip(&tables.delta) {
        let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
        println!(
            "{:<8} {:<22} {:>10} {:>12} {:>12}",
            p.problem,
            p.solver.name(),
            show(p.value),
            show(g.value),
            show(d.value)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::ListProblems { format } => list_problems(format),
        Command::Solve(args) => solve(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Metrics { dir } => metrics(dir),
    };
    outcome.unwrap_or_else(|e: Error| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
