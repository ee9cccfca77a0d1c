use std::collections::BTreeMap;
use std::sync::Arc;

use super::schemes::{build_stencil, field_stencil, with_clamping};
use super::{Family, Stencil, Variant};
use crate::coeff::{CoefficientField, Sign, SignPartition};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MultiIndex};

/// Everything a scheme needs to produce the stencil of one knot.
#[derive(Clone, Debug)]
pub struct SchemeContext<'a> {
    pub field: &'a CoefficientField,
    pub grid: &'a GridSpec,
    pub strides: Vec<usize>,
    /// One partition per plane `(i, j)`, `i < j`.
    pub partitions: Vec<SignPartition>,
}

impl SchemeContext<'_> {
    /// Variant of plane `axes` at knot `lin`, from its sign partition when present.
    pub fn plane_variant(&self, axes: (usize, usize), lin: usize, x: &[f64]) -> Variant {
        match self.partitions.iter().find(|p| p.axes == axes) {
            Some(p) => match p.region(lin) {
                Sign::Minus => Variant::First,
                _ => Variant::Second,
            },
            None => Variant::for_sign(self.field.entry(axes.0, axes.1, x)),
        }
    }
}

pub trait StencilScheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn family(&self) -> Family;

    /// Whether the scheme reads the sign partition of the context.
    fn uses_partition(&self) -> bool {
        false
    }

    fn stencil(&self, ctx: &SchemeContext<'_>, knot: &MultiIndex) -> Result<Stencil>;

    /// Hat strides for lumping right-hand sides consistently with this scheme.
    fn hat_strides(&self, strides: &[usize]) -> Vec<usize> {
        match self.family() {
            Family::Standard => strides.to_vec(),
            Family::Extended => vec![1; strides.len()],
        }
    }
}

struct Partitioned(Family, &'static str);

impl StencilScheme for Partitioned {
    fn name(&self) -> &'static str {
        self.1
    }

    fn family(&self) -> Family {
        self.0
    }

    fn uses_partition(&self) -> bool {
        true
    }

    fn stencil(&self, ctx: &SchemeContext<'_>, knot: &MultiIndex) -> Result<Stencil> {
        let lin = ctx
            .grid
            .linear(&knot.0)
            .ok_or_else(|| Error::InvalidGrid(format!("knot {knot} outside grid")))?;
        let x = ctx.grid.coord(knot);
        let pick = |axes| ctx.plane_variant(axes, lin, &x);
        field_stencil(ctx.field, ctx.grid, knot, &ctx.strides, self.0, &pick)
    }
}

struct Fixed(Family, Variant, &'static str);

impl StencilScheme for Fixed {
    fn name(&self) -> &'static str {
        self.2
    }

    fn family(&self) -> Family {
        self.0
    }

    fn stencil(&self, ctx: &SchemeContext<'_>, knot: &MultiIndex) -> Result<Stencil> {
        let v = self.1;
        field_stencil(ctx.field, ctx.grid, knot, &ctx.strides, self.0, &|_| v)
    }
}

/// Coefficients frozen at the knot, corners chosen by the local sign of `a_ij`.
struct Frozen(Family, &'static str);

impl StencilScheme for Frozen {
    fn name(&self) -> &'static str {
        self.1
    }

    fn family(&self) -> Family {
        self.0
    }

    fn stencil(&self, ctx: &SchemeContext<'_>, knot: &MultiIndex) -> Result<Stencil> {
        let x = ctx.grid.coord(knot);
        let a = ctx.field.tensor(&x);
        let coef = |_: &[f64]| a.clone();
        let pick = |(i, j): (usize, usize)| Variant::for_sign(a.get(i, j));
        with_clamping(ctx.grid, knot, &ctx.strides, |r| {
            build_stencil(&coef, knot.clone(), &x, ctx.grid.h(), r, self.0, &pick)
        })
    }
}

/// Scheme strategies registered by name.
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Arc<dyn StencilScheme>>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = Self { schemes: BTreeMap::new() };
        r.register(Arc::new(Partitioned(Family::Extended, "extended")));
        r.register(Arc::new(Partitioned(Family::Standard, "standard")));
        r.register(Arc::new(Fixed(Family::Extended, Variant::First, "extended-first")));
        r.register(Arc::new(Fixed(Family::Extended, Variant::Second, "extended-second")));
        r.register(Arc::new(Fixed(Family::Standard, Variant::First, "standard-first")));
        r.register(Arc::new(Fixed(Family::Standard, Variant::Second, "standard-second")));
        r.register(Arc::new(Frozen(Family::Standard, "constant-cross")));
        r.register(Arc::new(Frozen(Family::Extended, "constant-extended")));
        r
    }
}

impl SchemeRegistry {
    pub fn register(&mut self, scheme: Arc<dyn StencilScheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn StencilScheme>> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName { kind: "scheme", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.keys().copied().collect()
    }
}
