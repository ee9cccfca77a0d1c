//! Linear solvers for `(λI + A) u = rhs`, registered by name.

mod direct;
mod fixed_point;
mod krylov;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix};

pub use direct::{direct_solve, BandedLu, DIRECT_LIMIT};
pub use fixed_point::{fixed_point_solve, fixed_point_solve_observed};
pub use krylov::robust_solve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedPoint,
    Robust,
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FixedPoint => "fixed-point",
            Method::Robust => "robust",
            Method::Direct => "direct",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopNorm {
    /// `Σ |Δu_k|`
    UnscaledL1,
    /// `h^d Σ |Δu_k|`
    CellScaledL1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    Zero,
    Given,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub stopping: StopNorm,
    pub shift: f64,
    pub initial: InitialGuess,
    /// `h^d`, used by the cell-scaled stopping norm.
    pub cell_volume: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Robust,
            tolerance: 1e-10,
            max_iterations: 100_000,
            stopping: StopNorm::UnscaledL1,
            shift: 0.0,
            initial: InitialGuess::Zero,
            cell_volume: 1.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method, tolerance: f64, max_iterations: usize) -> Self {
        Self { method, tolerance, max_iterations, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.shift >= 0.0) {
            return Err(Error::Config(format!("shift must be >= 0, got {}", self.shift)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    /// Last successive-difference norm (fixed point only).
    pub final_difference: Option<f64>,
    /// `‖(λI + A)u - rhs‖_2`, recomputed after the solve.
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub wall_time_s: f64,
    pub converged: bool,
    pub stagnated: bool,
    pub max_iterations_reached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

impl SolveReport {
    pub(crate) fn finish(method: &str, a: &CsrMatrix, shift: f64, rhs: &[f64], u: &[f64], started: std::time::Instant) -> Self {
        let (residual_norm, relative_residual) = residual(a, shift, rhs, u);
        Self {
            method: method.into(),
            iterations: 0,
            final_difference: None,
            residual_norm,
            relative_residual,
            wall_time_s: started.elapsed().as_secs_f64(),
            converged: false,
            stagnated: false,
            max_iterations_reached: false,
            fallback: None,
        }
    }
}

/// Absolute and relative 2-norm residual of `(λI + A)u = rhs`.
pub fn residual(a: &CsrMatrix, shift: f64, rhs: &[f64], u: &[f64]) -> (f64, f64) {
    let mut r = a.apply(u);
    for i in 0..r.len() {
        r[i] += shift * u[i] - rhs[i];
    }
    let abs = norm2(&r);
    let b = norm2(rhs);
    (abs, if b > 0.0 { abs / b } else { abs })
}

pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)>;
}

struct FixedPoint;
struct Robust;
struct Direct;

impl LinearSolver for FixedPoint {
    fn name(&self) -> &'static str {
        "fixed-point"
    }

    fn solve(&self, a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        fixed_point_solve(a, rhs, cfg, x0)
    }
}

impl LinearSolver for Robust {
    fn name(&self) -> &'static str {
        "robust"
    }

    fn solve(&self, a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        robust_solve(a, rhs, cfg, x0)
    }
}

impl LinearSolver for Direct {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn solve(&self, a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, _x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        let started = std::time::Instant::now();
        let u = direct_solve(&a.shifted(cfg.shift), rhs)?;
        let mut rep = SolveReport::finish("direct", a, cfg.shift, rhs, &u, started);
        rep.converged = true;
        Ok((u, rep))
    }
}

pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Arc<dyn LinearSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = Self { solvers: BTreeMap::new() };
        r.register(Arc::new(FixedPoint));
        r.register(Arc::new(Robust));
        r.register(Arc::new(Direct));
        r
    }
}

impl SolverRegistry {
    pub fn register(&mut self, s: Arc<dyn LinearSolver>) {
        self.solvers.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn LinearSolver>> {
        self.solvers
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName { kind: "solver", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

/// Dispatches on `cfg.method` through the registry.
pub fn solve(a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if a.n() != rhs.len() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: rhs.len() });
    }
    if cfg.initial == InitialGuess::Given && x0.is_none() {
        return Err(Error::Config("initial guess 'given' requires a starting vector".into()));
    }
    let x0 = if cfg.initial == InitialGuess::Given { x0 } else { None };
    SolverRegistry::default().get(cfg.method.name())?.solve(a, rhs, cfg, x0)
}
