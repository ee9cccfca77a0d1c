//! Named model problems: coefficient field, right-hand side, boundary data and
//! (when known) the exact solution.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientField, ScalarFn, SymTensor, TensorValue};
use crate::error::{Error, Result};
use crate::grid::BoxDomain;
use crate::rhs::{example6_rhs, BoundaryData, MeasureSpec};

/// Tunable constants of the named problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    /// Background `a_11` of the example field.
    pub sigma_sq: f64,
    /// Off-diagonal `a_12` inside the inner square.
    pub rho: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self { sigma_sq: 10.0, rho: 2.0 }
    }
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub domain: BoxDomain,
    pub field: CoefficientField,
    pub rhs: MeasureSpec,
    pub boundary: BoundaryData,
    pub exact: Option<ScalarFn>,
    /// Scheme the problem is meant to be run with.
    pub scheme: String,
    /// `None` selects strides from the field.
    pub strides: Option<Vec<usize>>,
    /// Subdivisions must be a multiple of this so interfaces sit on grid lines.
    pub n_multiple: usize,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("field", &self.field.name())
            .field("scheme", &self.scheme)
            .field("strides", &self.strides)
            .finish()
    }
}

impl Problem {
    pub fn exact_at(&self, x: &[f64]) -> Option<f64> {
        self.exact.as_ref().map(|f| f(x))
    }
}

/// The inner square `[1/4, 3/4)^2` of the example.
pub fn example6_inner() -> BoxDomain {
    BoxDomain::new(vec![0.25, 0.25], vec![0.75, 0.75])
}

/// Background `diag(σ², 1)` with `[[σ², ρ], [ρ, 1]]` on the inner square.
pub fn example6_field(params: &ProblemParams) -> CoefficientField {
    let s = params.sigma_sq;
    CoefficientField::constant(SymTensor::diagonal(&[s, 1.0]))
        .with_box(example6_inner(), TensorValue::Constant(SymTensor::from_rows(&[vec![s, params.rho], vec![params.rho, 1.0]])))
        .named("example6")
}

fn bilinear() -> ScalarFn {
    Arc::new(|x: &[f64]| x[0] * x[1])
}

fn identity(_: &ProblemParams) -> Problem {
    Problem {
        name: "identity".into(),
        domain: BoxDomain::unit(2),
        field: CoefficientField::identity(2).named("identity"),
        rhs: MeasureSpec::zero(),
        boundary: BoundaryData::new(|x| x[0] * x[1]),
        exact: Some(bilinear()),
        scheme: "extended".into(),
        strides: Some(vec![1, 1]),
        n_multiple: 1,
    }
}

fn example6(params: &ProblemParams) -> Problem {
    Problem {
        name: "example6".into(),
        domain: BoxDomain::unit(2),
        field: example6_field(params),
        rhs: example6_rhs(params.rho, &example6_inner()),
        boundary: BoundaryData::new(|x| x[0] * x[1]),
        exact: Some(bilinear()),
        scheme: "extended".into(),
        strides: Some(vec![3, 1]),
        n_multiple: 4,
    }
}

fn manufactured_smooth(_: &ProblemParams) -> Problem {
    let u = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    Problem {
        name: "manufactured_smooth".into(),
        domain: BoxDomain::unit(2),
        field: CoefficientField::identity(2).named("manufactured_smooth"),
        rhs: MeasureSpec::zero().density(BoxDomain::unit(2), move |x| 2.0 * PI * PI * u(x)),
        boundary: BoundaryData::zero(),
        exact: Some(Arc::new(u)),
        scheme: "extended".into(),
        strides: Some(vec![1, 1]),
        n_multiple: 1,
    }
}

type Builder = fn(&ProblemParams) -> Problem;

/// Problem builders registered by name.
pub struct ProblemRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl Default for ProblemRegistry {
    fn default() -> Self {
        let mut r = Self { builders: BTreeMap::new() };
        r.register("identity", identity);
        r.register("example6", example6);
        r.register("manufactured_smooth", manufactured_smooth);
        r
    }
}

impl ProblemRegistry {
    pub fn register(&mut self, name: &'static str, b: Builder) {
        self.builders.insert(name, b);
    }

    pub fn build(&self, name: &str, params: &ProblemParams) -> Result<Problem> {
        self.builders
            .get(name)
            .map(|b| b(params))
            .ok_or_else(|| Error::UnknownName { kind: "problem", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }
}

pub fn problem(name: &str) -> Result<Problem> {
    ProblemRegistry::default().build(name, &ProblemParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contents() {
        assert_eq!(ProblemRegistry::default().names(), vec!["example6", "identity", "manufactured_smooth"]);
        assert!(problem("poisson3d").is_err());
    }

    #[test]
    fn example6_field_values() {
        let p = problem("example6").unwrap();
        assert_eq!(p.field.entry(0, 1, &[0.5, 0.5]), 2.0);
        assert_eq!(p.field.entry(0, 1, &[0.75, 0.5]), 0.0);
        assert_eq!(p.field.entry(0, 0, &[0.1, 0.9]), 10.0);
        assert_eq!(p.exact_at(&[0.5, 0.25]), Some(0.125));
    }
}
