//! Run configuration file: a flat, sectioned TOML document.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use monofd::problems::ProblemParams;
use monofd::solver::{Method, SolverConfig, StopNorm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Strides {
    Auto(AutoTag),
    Explicit(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Strides {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Strides::Auto(AutoTag::Auto));
        }
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad stride '{p}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|v| if v.contains(&0) { Err("strides must be >= 1".into()) } else { Ok(Strides::Explicit(v)) })
    }

    /// `Some(vec![])` requests automatic selection.
    pub fn resolve(&self) -> Option<Vec<usize>> {
        match self {
            Strides::Auto(_) => Some(Vec::new()),
            Strides::Explicit(r) => Some(r.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// One of the registered problems.
    pub name: String,
    pub n: usize,
    pub sigma_sq: f64,
    pub rho: f64,
    pub scheme: Option<String>,
    pub strides: Option<Strides>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let p = ProblemParams::default();
        Self { name: "example6".into(), n: 400, sigma_sq: p.sigma_sq, rho: p.rho, scheme: None, strides: None }
    }
}

impl ProblemSection {
    pub fn params(&self) -> ProblemParams {
        ProblemParams { sigma_sq: self.sigma_sq, rho: self.rho }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: Method,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub stopping: StopNorm,
    pub shift: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { method: Method::Robust, tolerance: 1e-12, max_iterations: 200_000, stopping: StopNorm::UnscaledL1, shift: 0.0 }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            stopping: self.stopping,
            shift: self.shift,
            ..SolverConfig::new(self.method, self.tolerance, self.max_iterations)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub levels: Vec<usize>,
    pub norms: Vec<String>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self { levels: vec![52, 100, 200, 400], norms: vec!["linf".into(), "eps_rel".into(), "w21".into()] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub study: StudySection,
    pub output: OutputSection,
}

/// Parses a config, reporting errors as `line L, column C: message`.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let col = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
                format!("line {line}, column {col}: {msg}")
            }
            None => msg,
        }
    })
}
