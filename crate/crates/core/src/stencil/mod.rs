//! Per-knot stencils for the monotone scheme families, stride selection and
//! a name-keyed registry of scheme strategies.

mod registry;
mod schemes;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coeff::{auxiliary_tensor, CoefficientField, SymTensor};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MultiIndex};

pub use registry::{SchemeContext, SchemeRegistry, StencilScheme};
pub use schemes::{
    compose_highdim, constant_stencil, extended_stencil, standard_stencil, upwind_stencil,
    ConstantVariant, PlaneStrides,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchemeKind {
    ConstCross,
    ConstExtended,
    StandardFirst,
    StandardSecond,
    ExtendedFirst,
    ExtendedSecond,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::ConstCross,
        SchemeKind::ConstExtended,
        SchemeKind::StandardFirst,
        SchemeKind::StandardSecond,
        SchemeKind::ExtendedFirst,
        SchemeKind::ExtendedSecond,
    ];

    pub fn family(self) -> Family {
        match self {
            SchemeKind::ConstCross | SchemeKind::StandardFirst | SchemeKind::StandardSecond => {
                Family::Standard
            }
            _ => Family::Extended,
        }
    }

    /// `None` for constant schemes, which choose per plane by the sign of `a_ij`.
    pub fn variant(self) -> Option<Variant> {
        match self {
            SchemeKind::StandardFirst | SchemeKind::ExtendedFirst => Some(Variant::First),
            SchemeKind::StandardSecond | SchemeKind::ExtendedSecond => Some(Variant::Second),
            _ => None,
        }
    }
}

/// Coarse-grid (standard) stencils versus unit-axis extended stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Standard,
    Extended,
}

/// `First` pairs with `a_ij <= 0` (corners along `r_i e_i - r_j e_j`),
/// `Second` with `a_ij >= 0` (corners along `r_i e_i + r_j e_j`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    First,
    Second,
}

impl Variant {
    pub fn for_sign(a_ij: f64) -> Self {
        if a_ij >= 0.0 {
            Variant::Second
        } else {
            Variant::First
        }
    }
}

/// One row of a system matrix: weights at offsets from the center knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub center: MultiIndex,
    pub anchor: Vec<f64>,
    pub h: f64,
    /// Stride vector actually used (after any boundary clamping).
    pub strides: Vec<usize>,
    pub clamped: bool,
    entries: Vec<(MultiIndex, f64)>,
}

impl Stencil {
    pub(crate) fn from_map(
        center: MultiIndex,
        anchor: Vec<f64>,
        h: f64,
        strides: Vec<usize>,
        map: BTreeMap<MultiIndex, f64>,
    ) -> Self {
        let zero = MultiIndex::zeros(center.dim());
        let mut entries: Vec<(MultiIndex, f64)> =
            map.into_iter().filter(|(o, w)| *w != 0.0 || o.is_zero()).collect();
        if !entries.iter().any(|(o, _)| o.is_zero()) {
            entries.push((zero, 0.0));
            entries.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Self { center, anchor, h, strides, clamped: false, entries }
    }

    /// Entries sorted by offset; the zero offset is always present.
    pub fn entries(&self) -> &[(MultiIndex, f64)] {
        &self.entries
    }

    pub fn off_center(&self) -> impl Iterator<Item = &(MultiIndex, f64)> {
        self.entries.iter().filter(|(o, _)| !o.is_zero())
    }

    pub fn weight(&self, offset: &MultiIndex) -> f64 {
        self.entries
            .binary_search_by(|(o, _)| o.cmp(offset))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn center_weight(&self) -> f64 {
        self.weight(&MultiIndex::zeros(self.center.dim()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|(_, w)| *w == 0.0)
    }

    /// A positive off-center weight or a negative center.
    pub fn is_flagged(&self) -> bool {
        self.center_weight() < 0.0 || self.off_center().any(|(_, w)| *w > 0.0)
    }

    pub fn targets(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.entries.iter().map(move |(o, w)| (&self.center + o, *w))
    }

    /// `Σ w_o u(anchor + h o)`.
    pub fn apply_fn(&self, u: impl Fn(&[f64]) -> f64) -> f64 {
        let mut s = 0.0;
        let mut x = vec![0.0; self.anchor.len()];
        for (o, w) in &self.entries {
            for (a, xa) in x.iter_mut().enumerate() {
                *xa = self.anchor[a] + self.h * o.0[a] as f64;
            }
            s += w * u(&x);
        }
        s
    }

    /// Adds another stencil with the same center.
    pub fn merged(&self, other: &Stencil) -> Stencil {
        let mut map: BTreeMap<MultiIndex, f64> = self.entries.iter().cloned().collect();
        for (o, w) in &other.entries {
            *map.entry(o.clone()).or_insert(0.0) += w;
        }
        let mut s = Stencil::from_map(
            self.center.clone(),
            self.anchor.clone(),
            self.h,
            self.strides.clone(),
            map,
        );
        s.clamped = self.clamped || other.clamped;
        s
    }

    /// Debug dump: one line per entry, `offset... weight`, sorted by offset.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (o, w) in &self.entries {
            for c in &o.0 {
                let _ = write!(out, "{c} ");
            }
            let _ = writeln!(out, "{w:e}");
        }
        out
    }
}

/// Accumulates symmetric couplings: each coupling adds `-w` at the offset and `+w` at the center.
pub(crate) struct Accum {
    dim: usize,
    map: BTreeMap<MultiIndex, f64>,
}

impl Accum {
    pub(crate) fn new(dim: usize) -> Self {
        let mut map = BTreeMap::new();
        map.insert(MultiIndex::zeros(dim), 0.0);
        Self { dim, map }
    }

    pub(crate) fn couple(&mut self, offset: MultiIndex, w: f64) {
        debug_assert_eq!(offset.dim(), self.dim);
        if w == 0.0 {
            return;
        }
        *self.map.entry(offset).or_insert(0.0) -= w;
        *self.map.get_mut(&MultiIndex::zeros(self.dim)).unwrap() += w;
    }

    pub(crate) fn add(&mut self, offset: MultiIndex, w: f64) {
        *self.map.entry(offset).or_insert(0.0) += w;
    }

    pub(crate) fn into_map(self) -> BTreeMap<MultiIndex, f64> {
        self.map
    }
}

/// Per-knot effective stride vectors with their global cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrideMap {
    pub r_max: usize,
    pub per_knot: Vec<Vec<usize>>,
}

impl StrideMap {
    pub fn uniform(num_knots: usize, r: &[usize], r_max: usize) -> Self {
        Self { r_max, per_knot: vec![r.to_vec(); num_knots] }
    }

    pub fn at(&self, lin: usize) -> &[usize] {
        &self.per_knot[lin]
    }

    pub fn is_valid(&self) -> bool {
        self.per_knot.iter().flatten().all(|&r| (1..=self.r_max).contains(&r))
    }
}

/// Axis brackets `a_ii - Σ_{m≠i} (r_i/r_m)|a_mi|`.
pub fn brackets(a: &SymTensor, r: &[usize]) -> Vec<f64> {
    let d = a.dim();
    (0..d)
        .map(|i| {
            let mut b = a.get(i, i);
            for m in 0..d {
                if m != i {
                    b -= (r[i] as f64 / r[m] as f64) * a.get(m, i).abs();
                }
            }
            b
        })
        .collect()
}

/// Candidate stride vectors in the selection order: max component, then sum, then lexicographic.
pub fn stride_candidates(dim: usize, r_max: usize) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    for _ in 0..dim {
        all = all
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (1..=r_max).map(move |r| {
                    let mut q = p.clone();
                    q.push(r);
                    q
                })
            })
            .collect();
    }
    all.sort_by(|a, b| {
        let ka = (a.iter().max(), a.iter().sum::<usize>());
        let kb = (b.iter().max(), b.iter().sum::<usize>());
        ka.cmp(&kb).then_with(|| a.cmp(b))
    });
    all
}

/// Smallest stride vector making every bracket strictly positive on all samples.
pub fn select_r(samples: &[SymTensor], r_max: usize) -> Result<Vec<usize>> {
    let distinct = dedup_tensors(samples);
    let dim = distinct.first().map(|t| t.dim()).ok_or_else(|| {
        Error::Config("stride selection needs at least one sample tensor".into())
    })?;
    for r in stride_candidates(dim, r_max) {
        if distinct.iter().all(|a| brackets(a, &r).iter().all(|b| *b > 0.0)) {
            return Ok(r);
        }
    }
    let aux_min_eig = distinct
        .iter()
        .map(|a| auxiliary_tensor(a).min_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    Err(Error::NoFeasibleStride { r_max, aux_min_eig })
}

/// Tensors sampled at all knots and half-knot points, deduplicated.
pub fn field_samples(field: &CoefficientField, grid: &GridSpec) -> Vec<SymTensor> {
    if let Some(values) = field.constant_values() {
        return values;
    }
    let pts = crate::coeff::sample_points(grid);
    dedup_tensors(&pts.iter().map(|x| field.tensor(x)).collect::<Vec<_>>())
}

pub fn select_r_for_field(field: &CoefficientField, grid: &GridSpec, r_max: usize) -> Result<Vec<usize>> {
    select_r(&field_samples(field, grid), r_max)
}

fn dedup_tensors(samples: &[SymTensor]) -> Vec<SymTensor> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in samples {
        let key: Vec<u64> = t.rows().iter().flatten().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            out.push(t.clone());
        }
    }
    out
}
