//! Verification harness: level pipeline, error tables, and the exactness,
//! structure, monotonicity, ellipticity, consistency, norm and convergence suites.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{sign_partition, CoefficientField, ScalarFn, SymTensor, VectorFn};
use crate::embed::{
    embed_eval, embedded_grad_inner, embedded_grad_sq, embedded_l1, embedded_l2_sq, embedded_linf, fourier_project,
    norm_scaled, q_r, HatBasis, NormKind,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, finite_difference, BoxDomain, Direction, GridFunction, GridSpec, KnotClass, MultiIndex, SubgridSpec};
use crate::linalg::det_sum;
use crate::operator::{assemble, form, structure_check, AssemblyOptions, SparseOperator, StructureReport};
use crate::problems::{example6_field, Problem, ProblemParams, ProblemRegistry};
use crate::quad::gauss_legendre;
use crate::rhs::{discretize_measure, lift_boundary};
use crate::solver::{self, BandedLu, Method, SolveReport, SolverConfig, StopNorm};
use crate::stencil::{select_r, select_r_for_field, field_samples, SchemeContext, SchemeRegistry};

/// How one level of a problem is discretized and solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Overrides the problem's scheme.
    pub scheme: Option<String>,
    /// Overrides the problem's strides; `Some(empty)` or a problem without strides selects them.
    pub strides: Option<Vec<usize>>,
    pub solver: SolverConfig,
    /// Refuse to solve when the operator is not compartmental.
    pub require_compartmental: bool,
    pub threshold: f64,
    pub r_max: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            scheme: None,
            strides: None,
            solver: SolverConfig::default(),
            require_compartmental: true,
            threshold: 0.5,
            r_max: 8,
        }
    }
}

/// A solved level.
#[derive(Clone, Debug)]
pub struct LevelSolve {
    pub n: usize,
    pub op: SparseOperator,
    pub solution: GridFunction,
    pub report: SolveReport,
    pub structure: StructureReport,
    pub strides: Vec<usize>,
    pub runtime_s: f64,
}

/// Builds the grid of a problem at `n` subdivisions.
pub fn problem_grid(p: &Problem, n: usize) -> Result<GridSpec> {
    if p.n_multiple > 1 && n % p.n_multiple != 0 {
        return Err(Error::Config(format!("problem '{}' needs N divisible by {}, got {n}", p.name, p.n_multiple)));
    }
    build_grid(p.domain.dim(), &p.domain, n)
}

/// Assembles the operator of a problem at `n`, selecting strides when none are given.
pub fn problem_operator(p: &Problem, n: usize, opts: &RunOptions) -> Result<SparseOperator> {
    let grid = problem_grid(p, n)?;
    let scheme = opts.scheme.clone().unwrap_or_else(|| p.scheme.clone());
    let strides = match opts.strides.clone().or_else(|| p.strides.clone()) {
        Some(r) if !r.is_empty() => r,
        _ => select_r_for_field(&p.field, &grid, opts.r_max)?,
    };
    let mut ao = AssemblyOptions::new(&scheme, strides);
    ao.threshold = opts.threshold;
    ao.r_max = opts.r_max;
    assemble(&p.field, &grid, &ao)
}

/// Assemble, check, lift, solve and reconstruct one level.
pub fn solve_problem(p: &Problem, n: usize, opts: &RunOptions) -> Result<LevelSolve> {
    let started = Instant::now();
    let op = problem_operator(p, n, opts)?;
    let structure = structure_check(&op);
    if opts.require_compartmental && !structure.is_compartmental {
        let first = &structure.violations[0];
        return Err(Error::StructureViolation(format!(
            "{} violations, first {:?} at row {} value {:e}",
            structure.violations.len(),
            first.kind,
            first.row,
            first.value
        )));
    }
    let grid = op.grid().clone();
    let mu = discretize_measure(&p.rhs, &grid, op.hat_strides())?;
    let rhs = lift_boundary(&op, &p.boundary, &mu)?;
    let mut cfg = opts.solver.clone();
    cfg.cell_volume = grid.h().powi(grid.dim() as i32);
    let (x, report) = solver::solve(op.matrix(), &rhs, &cfg, None)?;
    let g = p.boundary.on_grid(&grid, op.mask())?;
    let solution = op.scatter(&x, Some(&g));
    let strides = op.strides().at(op.knot_lin_of_row(0)).to_vec();
    Ok(LevelSolve { n, op, solution, report, structure, strides, runtime_s: started.elapsed().as_secs_f64() })
}

/// One row of an error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub n: usize,
    pub h: f64,
    /// `max_k |u*_k - u_k|` over interior knots.
    pub linf: f64,
    pub linf_at: Vec<f64>,
    pub linf_knot: Vec<i64>,
    /// `100 Σ|u*_k - u_k| / Σ|u*_k|` over interior knots.
    pub eps_rel: f64,
    /// Cell-scaled discrete W21 norm of the error.
    pub w21: f64,
    pub iterations: usize,
    pub converged: bool,
    pub solver: String,
    pub runtime_s: f64,
}

impl ErrorRow {
    pub fn value(&self, norm: &str) -> Option<f64> {
        match norm {
            "linf" => Some(self.linf),
            "eps_rel" => Some(self.eps_rel),
            "w21" => Some(self.w21),
            _ => None,
        }
    }
}

/// Knot errors of a solved level against the exact solution.
pub fn level_errors(level: &LevelSolve, exact: &(dyn Fn(&[f64]) -> f64 + Send + Sync)) -> Result<ErrorRow> {
    let grid = level.op.grid();
    let u = &level.solution;
    let mut err = GridFunction::with_mask(grid, u.mask().to_vec());
    let (mut linf, mut arg) = (0.0f64, 0usize);
    let (mut num, mut den) = (0.0, 0.0);
    for l in 0..grid.num_knots() {
        let x = grid.coord(&grid.multi(l));
        let ue = exact(&x);
        let e = ue - u.get_linear(l).ok_or_else(|| Error::UndefinedValue(grid.multi(l)))?;
        err.set_linear(l, e);
        if u.mask()[l] == KnotClass::Interior {
            num += e.abs();
            den += ue.abs();
            if e.abs() > linf {
                linf = e.abs();
                arg = l;
            }
        }
    }
    let knot = grid.multi(arg);
    Ok(ErrorRow {
        n: level.n,
        h: grid.h(),
        linf,
        linf_at: grid.coord(&knot),
        linf_knot: knot.0,
        eps_rel: if den > 0.0 { 100.0 * num / den } else { 100.0 * num },
        w21: norm_scaled(&err, &SubgridSpec::full(grid.dim()), &NormKind::DiscreteW21)?,
        iterations: level.report.iterations,
        converged: level.report.converged,
        solver: level.report.method.clone(),
        runtime_s: level.runtime_s,
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(hs: &[f64], errs: &[f64]) -> Option<f64> {
    if hs.len() < 2 || errs.iter().any(|e| !(*e > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub problem: String,
    pub scheme: String,
    pub norms: Vec<String>,
    pub rows: Vec<ErrorRow>,
    /// Fitted order per norm; empty with fewer than two levels.
    pub orders: BTreeMap<String, f64>,
    /// Every requested norm strictly decreases from level to level.
    pub monotone: bool,
}

impl ErrorTable {
    pub fn new(problem: &str, scheme: &str, norms: Vec<String>, rows: Vec<ErrorRow>) -> Self {
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let mut orders = BTreeMap::new();
        let mut monotone = true;
        for norm in &norms {
            let errs: Vec<f64> = rows.iter().filter_map(|r| r.value(norm)).collect();
            if let Some(o) = fitted_order(&hs, &errs) {
                orders.insert(norm.clone(), o);
            }
            monotone &= errs.windows(2).all(|w| w[1] < w[0]);
        }
        Self { problem: problem.into(), scheme: scheme.into(), norms, rows, orders, monotone }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "h", "linf", "linf_x1", "linf_x2", "eps_rel", "w21", "iterations", "converged", "runtime_s"])?;
        for r in &self.rows {
            let at = |i: usize| r.linf_at.get(i).map(|v| v.to_string()).unwrap_or_default();
            wr.write_record([
                r.n.to_string(),
                r.h.to_string(),
                r.linf.to_string(),
                at(0),
                at(1),
                r.eps_rel.to_string(),
                r.w21.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.runtime_s.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub problem: String,
    pub params: ProblemParams,
    pub levels: Vec<usize>,
    pub run: RunOptions,
    pub norms: Vec<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            problem: "example6".into(),
            params: ProblemParams::default(),
            levels: vec![52, 100, 200, 400],
            run: RunOptions::default(),
            norms: vec!["linf".into(), "eps_rel".into(), "w21".into()],
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("at least one grid level is required".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("levels must be strictly ascending, got {:?}", self.levels)));
        }
        if let Some(bad) = self.norms.iter().find(|n| !["linf", "eps_rel", "w21"].contains(&n.as_str())) {
            return Err(Error::Config(format!("unknown norm '{bad}' (expected linf, eps_rel or w21)")));
        }
        self.run.solver.validate()
    }
}

/// Error table across levels; levels are solved in parallel.
pub fn convergence_study(cfg: &StudyConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    let p = ProblemRegistry::default().build(&cfg.problem, &cfg.params)?;
    let exact = p
        .exact
        .clone()
        .ok_or_else(|| Error::Config(format!("problem '{}' has no exact solution", p.name)))?;
    let rows: Vec<ErrorRow> = cfg
        .levels
        .par_iter()
        .map(|&n| level_errors(&solve_problem(&p, n, &cfg.run)?, exact.as_ref()))
        .collect::<Result<_>>()?;
    let scheme = cfg.run.scheme.clone().unwrap_or_else(|| p.scheme.clone());
    Ok(ErrorTable::new(&p.name, &scheme, cfg.norms.clone(), rows))
}

/// The worked example at one level.
#[derive(Clone, Debug)]
pub struct Example6Run {
    pub row: ErrorRow,
    pub level: LevelSolve,
}

/// Default solver settings of the example: unscaled l1 stopping for the fixed point.
pub fn example6_solver(method: Method, tolerance: f64, max_iterations: usize) -> SolverConfig {
    SolverConfig { stopping: StopNorm::UnscaledL1, ..SolverConfig::new(method, tolerance, max_iterations) }
}

pub fn run_example6(n: usize, strides: &[usize], cfg: &SolverConfig) -> Result<Example6Run> {
    run_example6_with(n, strides, cfg, &ProblemParams::default())
}

pub fn run_example6_with(n: usize, strides: &[usize], cfg: &SolverConfig, params: &ProblemParams) -> Result<Example6Run> {
    if n % 4 != 0 {
        return Err(Error::Config(format!("the example needs N divisible by 4, got {n}")));
    }
    let p = ProblemRegistry::default().build("example6", params)?;
    let opts = RunOptions { strides: Some(strides.to_vec()), solver: cfg.clone(), ..RunOptions::default() };
    let level = solve_problem(&p, n, &opts)?;
    let row = level_errors(&level, p.exact.as_ref().unwrap().as_ref())?;
    Ok(Example6Run { row, level })
}

/// Structure reports of the example operator at several levels.
pub fn structure_study(levels: &[usize], strides: &[usize]) -> Result<Vec<StructureReport>> {
    let p = ProblemRegistry::default().build("example6", &ProblemParams::default())?;
    let opts = RunOptions { strides: Some(strides.to_vec()), ..RunOptions::default() };
    levels.par_iter().map(|&n| Ok(structure_check(&problem_operator(&p, n, &opts)?))).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessRow {
    pub scheme: String,
    pub tensors: usize,
    pub quadratics: usize,
    pub max_relative_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub dimension: usize,
    pub rows: Vec<ExactnessRow>,
    pub pass: bool,
}

/// Random SPD tensor whose stride brackets are feasible; off-diagonal signs
/// forced to `sign` when given.
fn random_feasible_tensor(rng: &mut ChaCha8Rng, d: usize, sign: Option<f64>, r_max: usize) -> (SymTensor, Vec<usize>) {
    loop {
        let mut a = SymTensor::identity(d);
        for i in 0..d {
            a.set(i, i, rng.gen_range(0.5..10.0));
        }
        for i in 0..d {
            for j in i + 1..d {
                let bound = (a.get(i, i) * a.get(j, j)).sqrt() / (d - 1) as f64;
                let mut v: f64 = rng.gen_range(-0.95..0.95) * bound;
                if let Some(s) = sign {
                    v = s * v.abs();
                }
                a.set(i, j, v);
            }
        }
        if let Ok(r) = select_r(std::slice::from_ref(&a), r_max) {
            return (a, r);
        }
    }
}

/// Residual of every scheme on random quadratics for random constant tensors.
/// Fixed-variant schemes get off-diagonals of their matching sign.
pub fn exactness_suite(schemes: &[&str], dimension: usize, tensors: usize, quadratics: usize, seed: u64) -> Result<ExactnessReport> {
    if !(2..=3).contains(&dimension) {
        return Err(Error::Config(format!("exactness suite supports dimension 2 or 3, got {dimension}")));
    }
    let registry = SchemeRegistry::default();
    let r_max = 4;
    let n = 4 * r_max + 4;
    let grid = build_grid(dimension, &BoxDomain::unit(dimension), n)?;
    let center = MultiIndex(vec![(n / 2) as i64; dimension]);
    let x0 = grid.coord(&center);
    let mut rows = Vec::new();
    for (si, &name) in schemes.iter().enumerate() {
        let scheme = registry.get(name)?;
        let sign = if name.ends_with("-first") {
            Some(-1.0)
        } else if name.ends_with("-second") {
            Some(1.0)
        } else {
            None
        };
        let mut rng = rng(seed.wrapping_add(si as u64));
        let mut worst = 0.0f64;
        for _ in 0..tensors {
            let (a, r) = random_feasible_tensor(&mut rng, dimension, sign, r_max);
            let field = CoefficientField::constant(a.clone());
            let mut partitions = Vec::new();
            if scheme.uses_partition() {
                for i in 0..dimension {
                    for j in i + 1..dimension {
                        partitions.push(sign_partition(&field, &grid, (i, j), f64::MIN_POSITIVE));
                    }
                }
            }
            let ctx = SchemeContext { field: &field, grid: &grid, strides: r, partitions };
            let st = scheme.stencil(&ctx, &center)?;
            for _ in 0..quadratics {
                let c: f64 = rng.gen_range(-1.0..1.0);
                let g: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut hm = vec![vec![0.0; dimension]; dimension];
                for i in 0..dimension {
                    for j in i..dimension {
                        let v = rng.gen_range(-1.0..1.0);
                        hm[i][j] = v;
                        hm[j][i] = v;
                    }
                }
                let u = |x: &[f64]| {
                    let y: Vec<f64> = (0..dimension).map(|i| x[i] - x0[i]).collect();
                    let mut s = c;
                    for i in 0..dimension {
                        s += g[i] * y[i];
                        for j in 0..dimension {
                            s += 0.5 * hm[i][j] * y[i] * y[j];
                        }
                    }
                    s
                };
                let mut exact = 0.0;
                let mut scale = 0.0;
                for i in 0..dimension {
                    for j in 0..dimension {
                        exact -= a.get(i, j) * hm[i][j];
                        scale += (a.get(i, j) * hm[i][j]).abs();
                    }
                }
                let res = (st.apply_fn(u) - exact).abs() / scale.max(exact.abs()).max(f64::MIN_POSITIVE);
                worst = worst.max(res);
            }
        }
        rows.push(ExactnessRow {
            scheme: name.into(),
            tensors,
            quadratics,
            max_relative_residual: worst,
            pass: worst <= 1e-9,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ExactnessReport { dimension, rows, pass })
}

/// A smooth test pair with gradients, for the bilinear-form comparison.
#[derive(Clone)]
pub struct SmoothPair {
    pub v: ScalarFn,
    pub grad_v: VectorFn,
    pub u: ScalarFn,
    pub grad_u: VectorFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub discrete: f64,
    pub continuum: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    /// `error(N) / error(2N)` for consecutive levels.
    pub ratios: Vec<f64>,
}

/// `a(v, u) = ∫ Σ_ij a_ij ∂_j u ∂_i v` over a box, by `order`-point Gauss on `cells^d` cells.
pub fn bilinear_form(field: &CoefficientField, pair: &SmoothPair, domain: &BoxDomain, cells: usize, order: usize) -> f64 {
    let d = domain.dim();
    let (x, w) = gauss_legendre(order);
    let side: Vec<f64> = (0..d).map(|a| (domain.hi[a] - domain.lo[a]) / cells as f64).collect();
    let total_cells = cells.pow(d as u32);
    let pts = order.pow(d as u32);
    det_sum(total_cells, |c| {
        let mut s = 0.0;
        for q in 0..pts {
            let mut p = vec![0.0; d];
            let mut wt = 1.0;
            for a in 0..d {
                let ci = (c / cells.pow(a as u32)) % cells;
                let qi = (q / order.pow(a as u32)) % order;
                p[a] = domain.lo[a] + side[a] * (ci as f64 + 0.5 * (x[qi] + 1.0));
                wt *= 0.5 * side[a] * w[qi];
            }
            let a = field.tensor(&p);
            let gu = (pair.grad_u)(&p);
            let gv = (pair.grad_v)(&p);
            let mut f = 0.0;
            for i in 0..d {
                for j in 0..d {
                    f += gv[i] * a.get(i, j) * gu[j];
                }
            }
            s += wt * f;
        }
        s
    })
}

/// `|h^d ⟨v_n | A_n u_n⟩ - a(v, u)|` per level.
pub fn consistency_suite(
    field: &CoefficientField,
    pair: &SmoothPair,
    domain: &BoxDomain,
    levels: &[usize],
    scheme: &str,
    strides: &[usize],
) -> Result<ConsistencyReport> {
    let continuum = bilinear_form(field, pair, domain, 256, 6);
    let rows: Vec<ConsistencyRow> = levels
        .iter()
        .map(|&n| {
            let grid = build_grid(domain.dim(), domain, n)?;
            let op = assemble(field, &grid, &AssemblyOptions::new(scheme, strides.to_vec()))?;
            let v = GridFunction::from_fn(&grid, |x| (pair.v)(x));
            let u = GridFunction::from_fn(&grid, |x| (pair.u)(x));
            let discrete = grid.h().powi(grid.dim() as i32) * form(&v, &op, &u)?;
            Ok(ConsistencyRow { n, discrete, continuum, error: (discrete - continuum).abs() })
        })
        .collect::<Result<_>>()?;
    let ratios = rows.windows(2).map(|w| w[0].error / w[1].error).collect();
    Ok(ConsistencyReport { rows, ratios })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// `(N, min entry of A^{-1})` per level.
    pub levels: Vec<(usize, f64)>,
    pub min_entry: f64,
    pub pass: bool,
}

/// Entrywise sign of the inverse of the example operator, column by column.
pub fn max_principle_check(levels: &[usize], strides: &[usize]) -> Result<MaxPrincipleReport> {
    let p = ProblemRegistry::default().build("example6", &ProblemParams::default())?;
    let opts = RunOptions { strides: Some(strides.to_vec()), ..RunOptions::default() };
    let mut out = Vec::new();
    for &n in levels {
        let op = problem_operator(&p, n, &opts)?;
        let lu = BandedLu::factor(op.matrix())?;
        let m = op.num_rows();
        let mins: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                lu.solve(&e).map(|col| col.into_iter().fold(f64::INFINITY, f64::min))
            })
            .collect::<Result<_>>()?;
        out.push((n, mins.into_iter().fold(f64::INFINITY, f64::min)));
    }
    let min_entry = out.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    Ok(MaxPrincipleReport { levels: out, min_entry, pass: min_entry >= -1e-12 })
}

/// Largest `κ` for which `a - κI` still admits feasible strides, by bisection.
pub fn splitting_constant(field: &CoefficientField, grid: &GridSpec, r_max: usize) -> f64 {
    let samples = field_samples(field, grid);
    let feasible = |k: f64| {
        let shifted: Vec<SymTensor> = samples.iter().map(|a| a.shifted(k)).collect();
        select_r(&shifted, r_max).is_ok()
    };
    if !feasible(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = samples.iter().map(|a| a.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    if feasible(hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Random values on a random interior box of knots, zero elsewhere.
pub fn random_compact(grid: &GridSpec, rng: &mut impl Rng) -> GridFunction {
    let d = grid.dim();
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    for a in 0..d {
        let n = grid.cells(a) as i64;
        let x = rng.gen_range(1..n);
        let y = rng.gen_range(1..n);
        lo[a] = x.min(y);
        hi[a] = x.max(y);
    }
    let mut u = GridFunction::zeros(grid);
    for l in 0..grid.num_knots() {
        let k = grid.multi(l);
        if (0..d).all(|a| k.0[a] >= lo[a] && k.0[a] <= hi[a]) {
            u.set_linear(l, rng.gen_range(-1.0..1.0));
        }
    }
    u
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub kappa_star: f64,
    pub kappa: f64,
    pub cases: usize,
    pub violations: usize,
    /// Smallest `⟨u|Au⟩ / Σ_i Σ_k (U_i(r_i)u)_k²` seen.
    pub min_ratio: f64,
    pub pass: bool,
}

/// `⟨u|A_0 u⟩ ≥ κ Σ_i Σ_k (U_i(r_i)u)_k²` on random compactly supported `u`, with
/// `κ` half the splitting constant.
pub fn ellipticity_check(field: &CoefficientField, n: usize, strides: &[usize], cases: usize, seed: u64) -> Result<EllipticityReport> {
    let grid = build_grid(2, &BoxDomain::unit(2), n)?;
    let kappa_star = splitting_constant(field, &grid, 8);
    let kappa = 0.5 * kappa_star;
    let op = assemble(&field.principal_part(), &grid, &AssemblyOptions::new("extended", strides.to_vec()))?;
    let mut rng = rng(seed);
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..cases {
        let u = random_compact(&grid, &mut rng);
        let lhs = form(&u, &op, &u)?;
        let mut energy = 0.0;
        for (axis, &r) in strides.iter().enumerate() {
            let du = finite_difference(&u, axis, r, Direction::Forward)?;
            energy += du.values().iter().flatten().map(|v| v * v).sum::<f64>();
        }
        if energy > 0.0 {
            min_ratio = min_ratio.min(lhs / energy);
        }
        if lhs < kappa * energy - 1e-12 * lhs.abs().max(1.0) {
            violations += 1;
        }
    }
    Ok(EllipticityReport { kappa_star, kappa, cases, violations, min_ratio, pass: violations == 0 && kappa >= 0.2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest amount by which an inequality was exceeded, relative to its bound.
    pub max_excess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SuiteResult {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

const SLACK: f64 = 1e-10;

fn random_basis(rng: &mut ChaCha8Rng, levels: &[usize]) -> Result<HatBasis> {
    loop {
        let n = levels[rng.gen_range(0..levels.len())];
        let grid = build_grid(2, &BoxDomain::unit(2), n)?;
        let r: Vec<usize> = (0..2).map(|_| rng.gen_range(1..=3)).collect();
        let origin = MultiIndex((0..2).map(|a| rng.gen_range(0..r[a] as i64)).collect());
        if let Ok(b) = HatBasis::new(&grid, SubgridSpec::new(origin, r)?) {
            return Ok(b);
        }
    }
}

fn record(res: &mut SuiteResult, value: f64, bound: f64) {
    let excess = (value - bound) / bound.abs().max(1.0);
    res.max_excess = res.max_excess.max(excess);
    if excess > SLACK {
        res.violations += 1;
    }
}

/// Gradient pairing bound, embedding upper bound, Fourier contraction and partition of unity.
pub fn norm_suites(cases: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::new();
    let blank = |name: &str| SuiteResult { name: name.into(), cases, violations: 0, max_excess: f64::NEG_INFINITY, note: None };

    let mut rng = rng(seed);
    let mut res = blank("gradient_pairing_bound");
    for _ in 0..cases {
        let b = random_basis(&mut rng, &[8, 16])?;
        let g = b.grid().clone();
        let v = random_compact(&g, &mut rng);
        let u = random_compact(&g, &mut rng);
        let lhs = embedded_grad_inner(&v, &u, &b)?.abs();
        let hd = g.h().powi(2);
        let rhs = hd * (q_r(&v, b.subgrid())? * q_r(&u, b.subgrid())?).sqrt();
        record(&mut res, lhs, rhs);
    }
    out.push(res);

    let mut rng = rng_from(seed, 1);
    let mut res = blank("embedding_upper_bound");
    let mut lower = f64::INFINITY;
    for _ in 0..cases {
        let b = random_basis(&mut rng, &[8, 16, 32])?;
        let g = b.grid().clone();
        let u = random_compact(&g, &mut rng);
        let cont = embedded_l2_sq(&u, &b)? + embedded_grad_sq(&u, &b)?;
        let disc = norm_scaled(&u, b.subgrid(), &NormKind::DiscreteW21)?.powi(2);
        if disc > 0.0 {
            lower = lower.min(cont / disc);
        }
        record(&mut res, cont, disc);
    }
    res.note = Some(format!("empirical lower constant (1 - sigma^2) ~ {lower:.4}"));
    out.push(res);

    let mut rng = rng_from(seed, 2);
    let mut res = blank("fourier_contraction");
    for _ in 0..cases {
        let b = random_basis(&mut rng, &[8, 12, 16])?;
        let g = b.grid().clone();
        let pw = PiecewisePoly::random(&g, &mut rng);
        let proj = fourier_project(|x| pw.eval(x), &b);
        let mut kf = GridFunction::zeros(&g);
        for k in b.knots() {
            kf.set(&k, proj.get(&k).unwrap());
        }
        record(&mut res, embedded_l1(&kf, &b)?, pw.l1());
        record(&mut res, embedded_l2_sq(&kf, &b)?.sqrt(), pw.l2());
        record(&mut res, embedded_linf(&kf, &b)?, pw.linf());
    }
    out.push(res);

    let mut rng = rng_from(seed, 3);
    let mut res = blank("partition_of_unity");
    for _ in 0..cases {
        let b = random_basis(&mut rng, &[8, 16, 32])?;
        let (lo, hi) = b.covered();
        let knots = b.knots();
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|a| rng.gen_range(lo[a]..=hi[a])).collect();
            let s: f64 = knots.iter().map(|k| b.hat(k, &x)).sum();
            let e = (s - 1.0).abs();
            res.max_excess = res.max_excess.max(e);
            if e > 1e-12 {
                res.violations += 1;
            }
        }
    }
    res.cases = cases * 10;
    out.push(res);
    Ok(out)
}

fn rng_from(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Piecewise polynomial on the fine cells: either constant of any sign or
/// bilinear with positive vertex values, so every norm is exact by quadrature.
struct PiecewisePoly {
    grid: GridSpec,
    /// Per cell, row-major, the four vertex values `[v00, v10, v01, v11]`.
    cells: Vec<[f64; 4]>,
}

impl PiecewisePoly {
    fn random(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Self {
        let nc = grid.cells(0) * grid.cells(1);
        let cells = (0..nc)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    [rng.gen_range(-1.0..1.0); 4].map(|v| v)
                } else {
                    [0; 4].map(|_| rng.gen_range(0.0..1.0))
                }
            })
            .collect();
        Self { grid: grid.clone(), cells }
    }

    fn locate(&self, x: &[f64]) -> (usize, f64, f64) {
        let h = self.grid.h();
        let n0 = self.grid.cells(0);
        let n1 = self.grid.cells(1);
        let s = (x[0] - self.grid.origin()[0]) / h;
        let t = (x[1] - self.grid.origin()[1]) / h;
        let i = (s.floor().max(0.0) as usize).min(n0 - 1);
        let j = (t.floor().max(0.0) as usize).min(n1 - 1);
        (i * n1 + j, s - i as f64, t - j as f64)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let (c, s, t) = self.locate(x);
        let v = self.cells[c];
        (1.0 - s) * (1.0 - t) * v[0] + s * (1.0 - t) * v[1] + (1.0 - s) * t * v[2] + s * t * v[3]
    }

    fn cell_area(&self) -> f64 {
        self.grid.h().powi(2)
    }

    fn l1(&self) -> f64 {
        // constant cells are all-equal; bilinear cells are positive
        self.cells.iter().map(|v| 0.25 * (v[0] + v[1] + v[2] + v[3]).abs()).sum::<f64>() * self.cell_area()
    }

    fn l2(&self) -> f64 {
        // ∫ bilinear² over the unit cell via the 4x4 mass matrix
        let m = [[4.0, 2.0, 2.0, 1.0], [2.0, 4.0, 1.0, 2.0], [2.0, 1.0, 4.0, 2.0], [1.0, 2.0, 2.0, 4.0]];
        let s: f64 = self
            .cells
            .iter()
            .map(|v| {
                let mut q = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        q += v[a] * m[a][b] * v[b];
                    }
                }
                q / 36.0
            })
            .sum();
        (s * self.cell_area()).sqrt()
    }

    fn linf(&self) -> f64 {
        self.cells.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub fixed_point_iterations: usize,
    /// Max-norm differences: fixed-point vs robust, fixed-point vs direct, robust vs direct.
    pub fp_robust: f64,
    pub fp_direct: f64,
    pub robust_direct: f64,
    pub pass: bool,
}

/// Solves the example at `n` with all three solvers and compares them.
pub fn solver_agreement(n: usize, strides: &[usize]) -> Result<AgreementReport> {
    let p = ProblemRegistry::default().build("example6", &ProblemParams::default())?;
    let solve_with = |cfg: SolverConfig| {
        let opts = RunOptions { strides: Some(strides.to_vec()), solver: cfg, ..RunOptions::default() };
        solve_problem(&p, n, &opts)
    };
    let fp = solve_with(example6_solver(Method::FixedPoint, 1e-12, 10_000_000))?;
    let rb = solve_with(SolverConfig::new(Method::Robust, 1e-13, 100_000))?;
    let dr = solve_with(SolverConfig::new(Method::Direct, 1e-13, 1))?;
    let diff = |a: &GridFunction, b: &GridFunction| {
        a.values()
            .iter()
            .zip(b.values())
            .filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).abs()))
            .fold(0.0f64, f64::max)
    };
    let fp_robust = diff(&fp.solution, &rb.solution);
    let fp_direct = diff(&fp.solution, &dr.solution);
    let robust_direct = diff(&rb.solution, &dr.solution);
    Ok(AgreementReport {
        n,
        fixed_point_iterations: fp.report.iterations,
        fp_robust,
        fp_direct,
        robust_direct,
        pass: fp.report.converged && fp_robust.max(fp_direct).max(robust_direct) <= 1e-6,
    })
}

/// The example field at the default parameters.
pub fn example6_default_field() -> CoefficientField {
    example6_field(&ProblemParams::default())
}

/// `u(n)` at a point, for plotting or spot checks of a solved level.
pub fn solution_at(level: &LevelSolve, x: &[f64]) -> Result<f64> {
    embed_eval(&level.solution, &HatBasis::unit(level.op.grid()), x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_zero_is_exact() {
        let params = ProblemParams { rho: 0.0, ..ProblemParams::default() };
        let cfg = SolverConfig::new(Method::Direct, 1e-12, 1);
        let run = run_example6_with(16, &[3, 1], &cfg, &params).unwrap();
        assert!(run.row.linf <= 1e-9 && run.row.eps_rel <= 1e-9, "{:?}", run.row);
    }

    #[test]
    fn example6_requires_multiple_of_four() {
        let cfg = SolverConfig::new(Method::Direct, 1e-12, 1);
        assert!(matches!(run_example6(18, &[3, 1], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn unit_strides_refused_for_example() {
        let cfg = SolverConfig::new(Method::Direct, 1e-12, 1);
        assert!(matches!(run_example6(16, &[1, 1], &cfg), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn order_fit() {
        let hs = [0.1, 0.05, 0.025];
        let es = [1e-2, 2.5e-3, 6.25e-4];
        assert!((fitted_order(&hs, &es).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_order(&hs[..1], &es[..1]).is_none());
    }

    #[test]
    fn single_level_table_has_no_orders() {
        let cfg = StudyConfig {
            problem: "manufactured_smooth".into(),
            levels: vec![8],
            ..StudyConfig::default()
        };
        let t = convergence_study(&cfg).unwrap();
        assert!(t.orders.is_empty() && t.rows.len() == 1 && t.monotone);
    }

    #[test]
    fn study_config_validation() {
        let bad = StudyConfig { levels: vec![16, 8], ..StudyConfig::default() };
        assert!(bad.validate().is_err());
        let bad = StudyConfig { norms: vec!["h1".into()], ..StudyConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identity_exactness_laplace_quadratic() {
        let r = exactness_suite(&["constant-cross"], 2, 3, 3, 7).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn csv_and_json_tables() {
        let cfg = StudyConfig { problem: "manufactured_smooth".into(), levels: vec![8, 16], ..StudyConfig::default() };
        let t = convergence_study(&cfg).unwrap();
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("n,h,linf"));
        let mut js = Vec::new();
        t.write_json(&mut js).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn splitting_constant_of_example() {
        let g = build_grid(2, &BoxDomain::unit(2), 16).unwrap();
        let k = splitting_constant(&example6_default_field(), &g, 8);
        assert!((k - 0.5).abs() < 1e-9, "{k}");
    }

    #[test]
    fn piecewise_poly_norms() {
        let g = build_grid(2, &BoxDomain::unit(2), 4).unwrap();
        let mut r = rng(3);
        let pw = PiecewisePoly::random(&g, &mut r);
        let (x, w) = gauss_legendre(4);
        let mut l2 = 0.0;
        let mut l1 = 0.0;
        let h = g.h();
        for i in 0..4 {
            for j in 0..4 {
                for (a, wa) in x.iter().zip(&w) {
                    for (b, wb) in x.iter().zip(&w) {
                        let p = [h * (i as f64 + 0.5 * (a + 1.0)), h * (j as f64 + 0.5 * (b + 1.0))];
                        let v = pw.eval(&p);
                        l2 += wa * wb * 0.25 * h * h * v * v;
                        l1 += wa * wb * 0.25 * h * h * v.abs();
                    }
                }
            }
        }
        assert!((l2.sqrt() - pw.l2()).abs() < 1e-13);
        assert!((l1 - pw.l1()).abs() < 1e-13);
    }
}
