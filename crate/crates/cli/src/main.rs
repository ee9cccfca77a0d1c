//! `monofd` command-line driver.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{RunConfig, Strides};
use monofd::operator::{structure_check, StructureReport};
use monofd::problems::ProblemRegistry;
use monofd::solver::SolveReport;
use monofd::study::{convergence_study, level_errors, problem_operator, solve_problem, ErrorRow, RunOptions, StudyConfig};

#[derive(Parser, Debug)]
#[command(name = "monofd", version, about = "Monotone finite-difference solver for divergence-form elliptic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble, solve and export the configured problem.
    Solve(Overrides),
    /// Report the sign structure of the assembled operator.
    Check(Overrides),
    /// Error table across grid levels.
    Study(Overrides),
    /// The canned discontinuous-coefficient example.
    Example6(Overrides),
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N", value_name = "N")]
    n: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Comma-separated strides, or `auto`.
    #[arg(long, value_parser = Strides::parse)]
    strides: Option<Strides>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Numerical(String),
    Config(String),
}

impl From<monofd::Error> for Failure {
    fn from(e: monofd::Error) -> Self {
        match e {
            monofd::Error::Config(_) | monofd::Error::UnknownName { .. } | monofd::Error::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(o: &Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            config::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = o.n {
        cfg.problem.n = n;
    }
    if let Some(t) = o.tol {
        cfg.solver.tolerance = t;
    }
    if let Some(m) = o.max_iter {
        cfg.solver.max_iterations = m;
    }
    if let Some(s) = &o.strides {
        cfg.problem.strides = Some(s.clone());
    }
    if let Some(d) = &o.out {
        cfg.output.dir = d.clone();
    }
    cfg.solver.to_config().validate()?;
    Ok(cfg)
}

fn run_options(cfg: &RunConfig, require_compartmental: bool) -> RunOptions {
    RunOptions {
        scheme: cfg.problem.scheme.clone(),
        strides: cfg.problem.strides.as_ref().and_then(Strides::resolve),
        solver: cfg.solver.to_config(),
        require_compartmental,
        ..RunOptions::default()
    }
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), value)?;
    Ok(path)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    problem: &'a str,
    n: usize,
    scheme: &'a str,
    strides: &'a [usize],
    solve: &'a SolveReport,
    compartmental: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<ErrorRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linf: Option<f64>,
}

fn solve(cfg: &RunConfig) -> Result<(), Failure> {
    let p = ProblemRegistry::default().build(&cfg.problem.name, &cfg.problem.params())?;
    let level = solve_problem(&p, cfg.problem.n, &run_options(cfg, true))?;
    fs::create_dir_all(&cfg.output.dir)?;
    level.solution.write_csv(BufWriter::new(File::create(cfg.output.dir.join("solution.csv"))?))?;
    let errors = match &p.exact {
        Some(exact) => Some(level_errors(&level, exact.as_ref())?),
        None => None,
    };
    let out = SolveOutput {
        problem: &p.name,
        n: level.n,
        scheme: level.op.scheme(),
        strides: &level.strides,
        solve: &level.report,
        compartmental: level.structure.is_compartmental,
        eps_rel: errors.as_ref().map(|e| e.eps_rel),
        linf: errors.as_ref().map(|e| e.linf),
        errors,
    };
    let path = write_json(&cfg.output.dir, "report.json", &out)?;
    println!(
        "{} N={} {} iterations={} converged={} residual={:.3e}",
        p.name, level.n, level.report.method, level.report.iterations, level.report.converged, level.report.relative_residual
    );
    if let Some(e) = &out.errors {
        println!("linf={:.6e} at {:?} eps_rel={:.6}", e.linf, e.linf_at, e.eps_rel);
    }
    println!("wrote {} and solution.csv", path.display());
    if level.report.converged {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("solver did not converge after {} iterations", level.report.iterations)))
    }
}

fn check(cfg: &RunConfig) -> Result<(), Failure> {
    let p = ProblemRegistry::default().build(&cfg.problem.name, &cfg.problem.params())?;
    let op = problem_operator(&p, cfg.problem.n, &run_options(cfg, false))?;
    let rep: StructureReport = structure_check(&op);
    fs::create_dir_all(&cfg.output.dir)?;
    let path = write_json(&cfg.output.dir, "structure.json", &rep)?;
    println!(
        "{} N={} rows={} compartmental={} irreducible={} violations={}",
        p.name, cfg.problem.n, rep.rows, rep.is_compartmental, rep.is_irreducible, rep.violations.len()
    );
    for v in rep.violations.iter().take(20) {
        println!("  {:?} at {:?} value {:e}", v.kind, v.row.0, v.value);
    }
    if rep.violations.len() > 20 {
        println!("  ... {} more in {}", rep.violations.len() - 20, path.display());
    }
    if rep.is_compartmental {
        Ok(())
    } else {
        Err(Failure::Numerical("operator is not compartmental".into()))
    }
}

fn study(cfg: &RunConfig) -> Result<(), Failure> {
    let sc = StudyConfig {
        problem: cfg.problem.name.clone(),
        params: cfg.problem.params(),
        levels: cfg.study.levels.clone(),
        run: run_options(cfg, true),
        norms: cfg.study.norms.clone(),
    };
    let table = convergence_study(&sc)?;
    fs::create_dir_all(&cfg.output.dir)?;
    write_json(&cfg.output.dir, "table.json", &table)?;
    table.write_csv(BufWriter::new(File::create(cfg.output.dir.join("table.csv"))?))?;
    println!("{:>6} {:>12} {:>12} {:>12}", "N", "linf", "eps_rel", "w21");
    for r in &table.rows {
        println!("{:>6} {:>12.4e} {:>12.4e} {:>12.4e}", r.n, r.linf, r.eps_rel, r.w21);
    }
    for (norm, order) in &table.orders {
        println!("order[{norm}] = {order:.3}");
    }
    if table.monotone {
        Ok(())
    } else {
        Err(Failure::Numerical("errors do not decrease monotonically".into()))
    }
}

fn example6(mut cfg: RunConfig, o: &Overrides) -> Result<(), Failure> {
    cfg.problem.name = "example6".into();
    if cfg.problem.strides.is_none() && o.strides.is_none() {
        cfg.problem.strides = Some(Strides::Explicit(vec![3, 1]));
    }
    solve(&cfg)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("MONOFD_THREADS") {
        let n: usize = v.parse().map_err(|_| Failure::Config(format!("MONOFD_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Solve(o) => load(o).and_then(|c| solve(&c)),
        Command::Check(o) => load(o).and_then(|c| check(&c)),
        Command::Study(o) => load(o).and_then(|c| study(&c)),
        Command::Example6(o) => load(o).and_then(|c| example6(c, o)),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numerical(m)) => {
            eprintln!("FAIL: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
