//! Coefficient fields of divergence-form operators, the auxiliary tensor,
//! sampled ellipticity bounds and the sign partition used for scheme selection.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::grid::{BoxDomain, GridSpec, MultiIndex};

pub type TensorFn = Arc<dyn Fn(&[f64]) -> SymTensor + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Dense symmetric d×d matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.dim).collect();
        write!(f, "{rows:?}")
    }
}

impl SymTensor {
    /// Builds from rows, symmetrising by averaging `a_ij` and `a_ji`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.len();
        assert!(rows.iter().all(|r| r.len() == d), "tensor rows must be square");
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Self { dim: d, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut data = vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            data[i * d + i] = *v;
        }
        Self { dim: d, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets `a_ij` and `a_ji` together.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn shifted(&self, kappa: f64) -> Self {
        let mut t = self.clone();
        for i in 0..self.dim {
            t.data[i * self.dim + i] -= kappa;
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            return vec![self.data[0]];
        }
        if self.dim == 2 {
            let (a, b, c) = (self.data[0], self.data[1], self.data[3]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            return vec![mean - rad, mean + rad];
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    /// `z^T a z`.
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += z[i] * self.data[i * d + j] * z[j];
            }
        }
        s
    }
}

/// `â_ii = a_ii`, `â_ij = -|a_ij|`.
pub fn auxiliary_tensor(a: &SymTensor) -> SymTensor {
    let d = a.dim();
    let mut out = a.clone();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                out.data[i * d + j] = -a.get(i, j).abs();
            }
        }
    }
    out
}

#[derive(Clone)]
pub enum TensorValue {
    Constant(SymTensor),
    Analytic(TensorFn),
}

impl TensorValue {
    fn eval(&self, x: &[f64]) -> SymTensor {
        match self {
            TensorValue::Constant(t) => t.clone(),
            TensorValue::Analytic(f) => f(x),
        }
    }
}

impl fmt::Debug for TensorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorValue::Constant(t) => write!(f, "Constant({t:?})"),
            TensorValue::Analytic(_) => write!(f, "Analytic(..)"),
        }
    }
}

/// A box overriding the background on `[lo, hi)`.
#[derive(Clone, Debug)]
pub struct TensorPiece {
    pub region: BoxDomain,
    pub value: TensorValue,
}

/// `a(x)`, `b(x)` and `c(x)` of the operator `-∂_i a_ij ∂_j + ∂_j(b_j ·) + c`.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    dim: usize,
    background: TensorValue,
    pieces: Vec<TensorPiece>,
    drift: Option<VectorFn>,
    reaction: Option<ScalarFn>,
    declared_bounds: Option<(f64, f64)>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("background", &self.background)
            .field("pieces", &self.pieces)
            .field("drift", &self.drift.is_some())
            .field("reaction", &self.reaction.is_some())
            .field("declared_bounds", &self.declared_bounds)
            .finish()
    }
}

impl CoefficientField {
    pub fn constant(a: SymTensor) -> Self {
        Self {
            name: "constant".into(),
            dim: a.dim(),
            background: TensorValue::Constant(a),
            pieces: Vec::new(),
            drift: None,
            reaction: None,
            declared_bounds: None,
        }
    }

    pub fn analytic(dim: usize, f: impl Fn(&[f64]) -> SymTensor + Send + Sync + 'static) -> Self {
        Self {
            name: "analytic".into(),
            dim,
            background: TensorValue::Analytic(Arc::new(f)),
            pieces: Vec::new(),
            drift: None,
            reaction: None,
            declared_bounds: None,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(SymTensor::identity(dim)).named("identity")
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    /// Adds a piece; later pieces take precedence where boxes overlap.
    pub fn with_box(mut self, region: BoxDomain, value: TensorValue) -> Self {
        assert_eq!(region.dim(), self.dim);
        self.pieces.push(TensorPiece { region, value });
        self
    }

    pub fn with_drift(mut self, b: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(b));
        self
    }

    pub fn with_reaction(mut self, c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Some(Arc::new(c));
        self
    }

    pub fn with_declared_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.declared_bounds = Some((lower, upper));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn declared_bounds(&self) -> Option<(f64, f64)> {
        self.declared_bounds
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn has_reaction(&self) -> bool {
        self.reaction.is_some()
    }

    /// True when no piece is analytic, so `a` is piecewise constant.
    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.background, TensorValue::Constant(_))
            && self.pieces.iter().all(|p| matches!(p.value, TensorValue::Constant(_)))
    }

    /// Distinct constant tensors of a piecewise-constant field.
    pub fn constant_values(&self) -> Option<Vec<SymTensor>> {
        if !self.is_piecewise_constant() {
            return None;
        }
        let mut out = Vec::new();
        let all = std::iter::once(&self.background).chain(self.pieces.iter().map(|p| &p.value));
        for v in all {
            if let TensorValue::Constant(t) = v {
                if !out.contains(t) {
                    out.push(t.clone());
                }
            }
        }
        Some(out)
    }

    /// Returns the same field with `a` replaced by `a - kappa I`.
    pub fn shifted(&self, kappa: f64) -> Self {
        let shift = |v: &TensorValue| match v {
            TensorValue::Constant(t) => TensorValue::Constant(t.shifted(kappa)),
            TensorValue::Analytic(f) => {
                let f = f.clone();
                TensorValue::Analytic(Arc::new(move |x: &[f64]| f(x).shifted(kappa)))
            }
        };
        let mut out = self.clone();
        out.background = shift(&self.background);
        for (p, q) in out.pieces.iter_mut().zip(&self.pieces) {
            p.value = shift(&q.value);
        }
        out
    }

    /// Same diffusion tensor without drift and reaction.
    pub fn principal_part(&self) -> Self {
        let mut out = self.clone();
        out.drift = None;
        out.reaction = None;
        out
    }

    pub fn tensor(&self, x: &[f64]) -> SymTensor {
        for piece in self.pieces.iter().rev() {
            if piece.region.contains_half_open(x) {
                return piece.value.eval(x);
            }
        }
        self.background.eval(x)
    }

    pub fn entry(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        self.tensor(x).get(i, j)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        match &self.drift {
            Some(b) => b(x),
            None => vec![0.0; self.dim],
        }
    }

    pub fn reaction(&self, x: &[f64]) -> f64 {
        self.reaction.as_ref().map(|c| c(x)).unwrap_or(0.0)
    }
}

/// Evaluates the field's tensor at a point.
pub fn eval_tensor(field: &CoefficientField, x: &[f64]) -> SymTensor {
    field.tensor(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub m_lower: f64,
    pub m_upper: f64,
    pub aux_min_eig: f64,
    pub min_reaction: f64,
    pub samples: usize,
}

impl EllipticityBounds {
    /// Whether `â` is positive definite at every sample.
    pub fn auxiliary_definite(&self) -> bool {
        self.aux_min_eig > 0.0
    }
}

/// All knots and half-knot midpoints of the grid: `origin + (h/2) m`, `0 <= m_i <= 2 N_i`.
pub fn sample_points(grid: &GridSpec) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let half = 0.5 * grid.h();
    let counts: Vec<usize> = (0..d).map(|a| 2 * grid.cells(a) + 1).collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut lin in 0..total {
        let mut x = vec![0.0; d];
        for a in (0..d).rev() {
            x[a] = grid.origin()[a] + half * (lin % counts[a]) as f64;
            lin /= counts[a];
        }
        out.push(x);
    }
    out
}

pub fn ellipticity_bounds(field: &CoefficientField, samples: &[Vec<f64>]) -> EllipticityBounds {
    assert!(!samples.is_empty(), "ellipticity bounds need at least one sample");
    let mut b = EllipticityBounds {
        m_lower: f64::INFINITY,
        m_upper: f64::NEG_INFINITY,
        aux_min_eig: f64::INFINITY,
        min_reaction: f64::INFINITY,
        samples: samples.len(),
    };
    for x in samples {
        let a = field.tensor(x);
        let ev = a.eigenvalues();
        b.m_lower = b.m_lower.min(ev[0]);
        b.m_upper = b.m_upper.max(*ev.last().unwrap());
        b.aux_min_eig = b.aux_min_eig.min(auxiliary_tensor(&a).min_eigenvalue());
        b.min_reaction = b.min_reaction.min(field.reaction(x));
    }
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
    Neutral,
}

/// Per-knot labels of the off-diagonal coefficient `a_ij` for one axis pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignPartition {
    pub axes: (usize, usize),
    pub threshold: f64,
    /// Raw labels before attachment of neutral knots.
    pub labels: Vec<Sign>,
    /// Final region of every knot, never `Neutral`.
    pub assigned: Vec<Sign>,
}

impl SignPartition {
    pub fn uniform(num_knots: usize, axes: (usize, usize), sign: Sign) -> Self {
        assert!(sign != Sign::Neutral);
        Self { axes, threshold: 0.0, labels: vec![sign; num_knots], assigned: vec![sign; num_knots] }
    }

    pub fn region(&self, lin: usize) -> Sign {
        self.assigned[lin]
    }

    pub fn count(&self, sign: Sign) -> usize {
        self.assigned.iter().filter(|s| **s == sign).count()
    }
}

/// Labels knots by `a_ij(x_k)` against `±threshold`; neutral knots join the
/// labelled region at smallest Euclidean index distance, ties going to `Plus`.
pub fn sign_partition(
    field: &CoefficientField,
    grid: &GridSpec,
    axes: (usize, usize),
    threshold: f64,
) -> SignPartition {
    let n = grid.num_knots();
    let labels: Vec<Sign> = (0..n)
        .map(|lin| {
            let v = field.entry(axes.0, axes.1, &grid.coord(&grid.multi(lin)));
            if v >= threshold {
                Sign::Plus
            } else if v <= -threshold {
                Sign::Minus
            } else {
                Sign::Neutral
            }
        })
        .collect();
    let has_plus = labels.contains(&Sign::Plus);
    let has_minus = labels.contains(&Sign::Minus);
    let assigned = if !has_minus {
        vec![Sign::Plus; n]
    } else if !has_plus {
        vec![Sign::Minus; n]
    } else {
        let dp = distance_transform(grid, &labels, Sign::Plus);
        let dm = distance_transform(grid, &labels, Sign::Minus);
        labels
            .iter()
            .enumerate()
            .map(|(l, s)| match s {
                Sign::Neutral if dp[l] <= dm[l] => Sign::Plus,
                Sign::Neutral => Sign::Minus,
                other => *other,
            })
            .collect()
    };
    SignPartition { axes, threshold, labels, assigned }
}

/// Exact squared Euclidean index distance to the nearest knot labelled `target`,
/// by separable lower-envelope passes along each axis.
fn distance_transform(grid: &GridSpec, labels: &[Sign], target: Sign) -> Vec<f64> {
    let big = 1e30;
    let mut f: Vec<f64> = labels.iter().map(|s| if *s == target { 0.0 } else { big }).collect();
    let d = grid.dim();
    for axis in 0..d {
        let len = grid.knots_per_axis(axis);
        let stride = grid.axis_stride(axis);
        let n = f.len();
        let mut line = vec![0.0; len];
        let mut out = vec![0.0; len];
        for start in 0..n {
            if (start / stride) % len != 0 {
                continue;
            }
            for (t, v) in line.iter_mut().enumerate() {
                *v = f[start + t * stride];
            }
            lower_envelope(&line, &mut out);
            for (t, v) in out.iter().enumerate() {
                f[start + t * stride] = *v;
            }
        }
    }
    f
}

fn lower_envelope(f: &[f64], out: &mut [f64]) {
    const BIG: f64 = 1e30;
    let sites: Vec<usize> = (0..f.len()).filter(|&q| f[q] < BIG).collect();
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = BIG);
        return;
    }
    let inter = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    let mut v = vec![sites[0]];
    let mut z = vec![f64::NEG_INFINITY, f64::INFINITY];
    for &q in &sites[1..] {
        let mut s = inter(q, *v.last().unwrap());
        while s <= z[v.len() - 1] {
            v.pop();
            z.pop();
            s = inter(q, *v.last().unwrap());
        }
        let last = z.len() - 1;
        z[last] = s;
        v.push(q);
        z.push(f64::INFINITY);
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *o = dq * dq + f[v[k]];
    }
}

/// Index of the knot closest to `x` (for diagnostics).
pub fn nearest_knot(grid: &GridSpec, x: &[f64]) -> MultiIndex {
    MultiIndex((0..grid.dim()).map(|a| grid.nearest_index(a, x[a])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use proptest::prelude::*;

    fn t2(a: f64, b: f64, c: f64) -> SymTensor {
        SymTensor::from_rows(&[vec![a, b], vec![b, c]])
    }

    fn example_field() -> CoefficientField {
        CoefficientField::constant(SymTensor::diagonal(&[10.0, 1.0])).with_box(
            BoxDomain::new(vec![0.25, 0.25], vec![0.75, 0.75]),
            TensorValue::Constant(t2(10.0, 2.0, 1.0)),
        )
    }

    #[test]
    fn eval_piecewise_tensor() {
        let f = example_field();
        assert_eq!(f.tensor(&[0.5, 0.5]), t2(10.0, 2.0, 1.0));
        assert_eq!(f.tensor(&[0.1, 0.1]), t2(10.0, 0.0, 1.0));
        // half-open box
        assert_eq!(f.tensor(&[0.25, 0.5]).get(0, 1), 2.0);
        assert_eq!(f.tensor(&[0.75, 0.5]).get(0, 1), 0.0);
        assert_eq!(CoefficientField::identity(3).tensor(&[0.3, 0.1, 0.9]), SymTensor::identity(3));
    }

    #[test]
    fn auxiliary_examples() {
        assert_eq!(auxiliary_tensor(&t2(10.0, 2.0, 1.0)), t2(10.0, -2.0, 1.0));
        assert_eq!(auxiliary_tensor(&t2(3.0, 0.0, 1.0)), t2(3.0, 0.0, 1.0));
        assert_eq!(auxiliary_tensor(&t2(2.0, -1.0, 2.0)), t2(2.0, -1.0, 2.0));
    }

    #[test]
    fn ellipticity_examples() {
        let g = build_grid(2, &BoxDomain::unit(2), 8).unwrap();
        let b = ellipticity_bounds(&example_field(), &sample_points(&g));
        assert!((b.aux_min_eig - (11.0 - 97f64.sqrt()) / 2.0).abs() < 1e-12);
        let b = ellipticity_bounds(&CoefficientField::identity(2), &sample_points(&g));
        assert_eq!((b.m_lower, b.m_upper, b.aux_min_eig), (1.0, 1.0, 1.0));
        let near = CoefficientField::constant(t2(1.0, 0.999, 1.0));
        let b = ellipticity_bounds(&near, &[vec![0.5, 0.5]]);
        assert!((b.aux_min_eig - 0.001).abs() < 1e-12);
        assert!(b.auxiliary_definite());
    }

    #[test]
    fn sample_points_cover_half_grid() {
        let g = build_grid(2, &BoxDomain::unit(2), 4).unwrap();
        let s = sample_points(&g);
        assert_eq!(s.len(), 81);
        assert_eq!(s[1], vec![0.0, 0.125]);
    }

    #[test]
    fn partition_example_all_plus() {
        let g = build_grid(2, &BoxDomain::unit(2), 16).unwrap();
        let p = sign_partition(&example_field(), &g, (0, 1), 0.5);
        assert_eq!(p.count(Sign::Plus), g.num_knots());
        let lin = g.linear(&[8, 8]).unwrap();
        assert_eq!(p.labels[lin], Sign::Plus);
        assert_eq!(p.labels[g.linear(&[1, 1]).unwrap()], Sign::Neutral);
    }

    #[test]
    fn partition_all_minus() {
        let g = build_grid(2, &BoxDomain::unit(2), 8).unwrap();
        let f = CoefficientField::constant(t2(2.0, -1.0, 2.0));
        let p = sign_partition(&f, &g, (0, 1), 0.5);
        assert_eq!(p.count(Sign::Minus), g.num_knots());
    }

    #[test]
    fn partition_matches_brute_force_nearest_region() {
        let g = build_grid(2, &BoxDomain::unit(2), 20).unwrap();
        let f = CoefficientField::analytic(2, |x| t2(2.0, x[0] - 0.5 + 0.3 * x[1] * x[1], 2.0));
        let p = sign_partition(&f, &g, (0, 1), 0.1);
        let labelled: Vec<(MultiIndex, Sign)> = (0..g.num_knots())
            .filter(|&l| p.labels[l] != Sign::Neutral)
            .map(|l| (g.multi(l), p.labels[l]))
            .collect();
        for l in 0..g.num_knots() {
            if p.labels[l] != Sign::Neutral {
                assert_eq!(p.assigned[l], p.labels[l]);
                continue;
            }
            let k = g.multi(l);
            let d2 = |s: Sign| {
                labelled
                    .iter()
                    .filter(|(_, t)| *t == s)
                    .map(|(m, _)| {
                        let dv = &k - m;
                        dv.0.iter().map(|c| (c * c) as f64).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let expect = if d2(Sign::Plus) <= d2(Sign::Minus) { Sign::Plus } else { Sign::Minus };
            assert_eq!(p.assigned[l], expect, "knot {k}");
        }
        assert!(p.count(Sign::Plus) > 0 && p.count(Sign::Minus) > 0);
    }

    fn spd2() -> impl Strategy<Value = SymTensor> {
        (0.1f64..5.0, 0.1f64..5.0, -1.0f64..1.0)
            .prop_map(|(l1, l2, c)| t2(l1 + c * c, c * (l1 * l2).sqrt(), l2 + c * c))
    }

    proptest! {
        #[test]
        fn auxiliary_is_idempotent(a in spd2()) {
            let h = auxiliary_tensor(&a);
            prop_assert_eq!(auxiliary_tensor(&h), h);
        }

        #[test]
        fn auxiliary_min_eig_not_larger(a in spd2()) {
            prop_assert!(auxiliary_tensor(&a).min_eigenvalue() <= a.min_eigenvalue() + 1e-12);
        }

        #[test]
        fn partition_covers_every_knot(shift in -1.0f64..1.0, thr in 0.01f64..0.5) {
            let g = build_grid(2, &BoxDomain::unit(2), 10).unwrap();
            let f = CoefficientField::analytic(2, move |x| t2(2.0, x[0] + x[1] - 1.0 + shift, 2.0));
            let p = sign_partition(&f, &g, (0, 1), thr);
            prop_assert_eq!(p.assigned.len(), g.num_knots());
            prop_assert!(p.assigned.iter().all(|s| *s != Sign::Neutral));
        }
    }
}
