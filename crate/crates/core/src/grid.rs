//! Uniform tensor-product grids, index bookkeeping and grid functions.
//!
//! Knot coordinates are never stored: a knot is a [`MultiIndex`] and its
//! position is recomputed as `origin + h * k` whenever it is needed, so knot
//! equality is integer equality.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer lattice coordinates of a knot (or an offset between knots).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn new(components: Vec<i64>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// `scale * e_axis` in `dim` dimensions.
    pub fn unit(dim: usize, axis: usize, scale: i64) -> Self {
        let mut c = vec![0; dim];
        c[axis] = scale;
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &MultiIndex {
    type Output = MultiIndex;
    fn sub(self, rhs: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &MultiIndex {
    type Output = MultiIndex;
    fn neg(self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|a| -a).collect())
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Half-open membership `lo <= x < hi` on every axis.
    pub fn contains_half_open(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi < hi)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

/// Uniform grid `G_n` restricted to the index window `0..=cells[i]` on each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    origin: Vec<f64>,
    h: f64,
    cells: Vec<usize>,
}

/// Builds the grid covering `domain` with `subdivisions` cells along the first
/// axis. Every other axis must be an integer multiple of the same step.
pub fn build_grid(dimension: usize, domain: &BoxDomain, subdivisions: usize) -> Result<GridSpec> {
    if dimension == 0 {
        return Err(Error::InvalidGrid("dimension must be at least 1".into()));
    }
    if domain.dim() != dimension || domain.hi.len() != dimension {
        return Err(Error::DimensionMismatch { expected: dimension, got: domain.dim() });
    }
    if subdivisions < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 subdivisions, got {subdivisions}")));
    }
    let sides: Vec<f64> = domain.lo.iter().zip(&domain.hi).map(|(l, h)| h - l).collect();
    if let Some(bad) = sides.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidGrid(format!("box sides must be positive, got {bad}")));
    }
    let h = sides[0] / subdivisions as f64;
    let mut cells = Vec::with_capacity(dimension);
    for (axis, side) in sides.iter().enumerate() {
        let n = (side / h).round();
        if (n * h - side).abs() > 1e-9 * side || n < 2.0 {
            return Err(Error::InvalidGrid(format!(
                "axis {axis} side {side} is not a multiple (>= 2) of the step {h}"
            )));
        }
        cells.push(n as usize);
    }
    Ok(GridSpec { origin: domain.lo.clone(), h, cells })
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Number of cells N along `axis`.
    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn knots_per_axis(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn num_knots(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn bounding_box(&self) -> BoxDomain {
        BoxDomain {
            lo: self.origin.clone(),
            hi: self
                .origin
                .iter()
                .zip(&self.cells)
                .map(|(o, &n)| o + self.h * n as f64)
                .collect(),
        }
    }

    pub fn coord_axis(&self, axis: usize, k: i64) -> f64 {
        self.origin[axis] + self.h * k as f64
    }

    pub fn coord(&self, idx: &MultiIndex) -> Vec<f64> {
        idx.0.iter().enumerate().map(|(a, &k)| self.coord_axis(a, k)).collect()
    }

    pub fn in_window(&self, idx: &[i64]) -> bool {
        idx.iter().zip(&self.cells).all(|(&k, &n)| k >= 0 && k <= n as i64)
    }

    /// Row-major linear index (last axis fastest).
    pub fn linear(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.dim() || !self.in_window(idx) {
            return None;
        }
        let mut lin = 0usize;
        for (&k, &n) in idx.iter().zip(&self.cells) {
            lin = lin * (n + 1) + k as usize;
        }
        Some(lin)
    }

    pub fn multi(&self, mut lin: usize) -> MultiIndex {
        let d = self.dim();
        let mut c = vec![0i64; d];
        for axis in (0..d).rev() {
            let m = self.cells[axis] + 1;
            c[axis] = (lin % m) as i64;
            lin /= m;
        }
        MultiIndex(c)
    }

    /// Linear stride of a unit step along `axis`.
    pub fn axis_stride(&self, axis: usize) -> usize {
        self.cells[axis + 1..].iter().map(|n| n + 1).product()
    }

    /// All knots of the window in row-major order.
    pub fn knots(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.num_knots()).map(move |l| self.multi(l))
    }

    /// Nearest knot index along `axis` for coordinate `x` (may be out of window).
    pub fn nearest_index(&self, axis: usize, x: f64) -> i64 {
        ((x - self.origin[axis]) / self.h).round() as i64
    }
}

/// Stride-translated subgrid `G_n(R) = r0 + { sum k_l r_l e_l }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgridSpec {
    pub origin: MultiIndex,
    pub strides: Vec<usize>,
}

impl SubgridSpec {
    pub fn new(origin: MultiIndex, strides: Vec<usize>) -> Result<Self> {
        if origin.dim() != strides.len() {
            return Err(Error::DimensionMismatch { expected: strides.len(), got: origin.dim() });
        }
        if strides.iter().any(|&r| r == 0) {
            return Err(Error::InvalidGrid("strides must be >= 1".into()));
        }
        Ok(Self { origin, strides })
    }

    /// The fine grid itself (all strides 1).
    pub fn full(dim: usize) -> Self {
        Self { origin: MultiIndex::zeros(dim), strides: vec![1; dim] }
    }

    pub fn vol(&self) -> usize {
        self.strides.iter().product()
    }

    pub fn contains(&self, idx: &MultiIndex) -> bool {
        idx.0
            .iter()
            .zip(&self.origin.0)
            .zip(&self.strides)
            .all(|((&k, &o), &r)| (k - o).rem_euclid(r as i64) == 0)
    }

    /// The `vol(R)` translates that partition the grid, in lexicographic order
    /// of their origin offsets `0 <= o_i < r_i`.
    pub fn translates(strides: &[usize]) -> Vec<SubgridSpec> {
        let mut out = vec![Vec::new()];
        for &r in strides {
            let mut next = Vec::with_capacity(out.len() * r);
            for prefix in &out {
                for o in 0..r as i64 {
                    let mut p: Vec<i64> = prefix.clone();
                    p.push(o);
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|o| SubgridSpec { origin: MultiIndex(o), strides: strides.to_vec() })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnotClass {
    Interior,
    Boundary,
    Exterior,
}

/// Interior = strictly inside `domain`, boundary = on its boundary, exterior = outside.
pub fn classify_knots(grid: &GridSpec, domain: &BoxDomain) -> Vec<KnotClass> {
    let eps = 1e-9 * grid.h();
    (0..grid.num_knots())
        .map(|lin| {
            let x = grid.coord(&grid.multi(lin));
            let mut on_boundary = false;
            for (a, &xa) in x.iter().enumerate() {
                let (lo, hi) = (domain.lo[a], domain.hi[a]);
                if xa < lo - eps || xa > hi + eps {
                    return KnotClass::Exterior;
                }
                if (xa - lo).abs() <= eps || (xa - hi).abs() <= eps {
                    on_boundary = true;
                }
            }
            if on_boundary {
                KnotClass::Boundary
            } else {
                KnotClass::Interior
            }
        })
        .collect()
}

/// Values over the full index window of a grid, with an explicit "undefined"
/// state and the interior/boundary/exterior classification of every knot.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<Option<f64>>,
    mask: Vec<KnotClass>,
}

impl GridFunction {
    /// All values undefined; mask taken from the grid's own bounding box.
    pub fn undefined(grid: &GridSpec) -> Self {
        let mask = classify_knots(grid, &grid.bounding_box());
        Self { grid: grid.clone(), values: vec![None; grid.num_knots()], mask }
    }

    pub fn with_mask(grid: &GridSpec, mask: Vec<KnotClass>) -> Self {
        assert_eq!(mask.len(), grid.num_knots());
        Self { grid: grid.clone(), values: vec![None; grid.num_knots()], mask }
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        let mut u = Self::undefined(grid);
        u.values.iter_mut().for_each(|v| *v = Some(0.0));
        u
    }

    /// Nodal values `f(x_k)` at every knot of the window.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut u = Self::undefined(grid);
        for lin in 0..grid.num_knots() {
            let x = grid.coord(&grid.multi(lin));
            u.values[lin] = Some(f(&x));
        }
        u
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mask(&self) -> &[KnotClass] {
        &self.mask
    }

    pub fn set_mask(&mut self, mask: Vec<KnotClass>) {
        assert_eq!(mask.len(), self.values.len());
        self.mask = mask;
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, idx: &MultiIndex) -> Option<f64> {
        self.grid.linear(&idx.0).and_then(|l| self.values[l])
    }

    pub fn get_linear(&self, lin: usize) -> Option<f64> {
        self.values[lin]
    }

    pub fn require(&self, idx: &MultiIndex) -> Result<f64> {
        self.get(idx).ok_or_else(|| Error::UndefinedValue(idx.clone()))
    }

    /// Stores a value; non-finite values are rejected by panicking since they
    /// would violate the finiteness invariant.
    pub fn set(&mut self, idx: &MultiIndex, value: f64) {
        let lin = self.grid.linear(&idx.0).expect("index outside grid window");
        self.set_linear(lin, value);
    }

    pub fn set_linear(&mut self, lin: usize, value: f64) {
        assert!(value.is_finite(), "grid function values must be finite");
        self.values[lin] = Some(value);
    }

    pub fn clear(&mut self, lin: usize) {
        self.values[lin] = None;
    }

    /// Keeps only values at knots with the given class.
    pub fn restrict_to(&self, class: KnotClass) -> Self {
        let mut out = self.clone();
        for (v, m) in out.values.iter_mut().zip(&self.mask) {
            if *m != class {
                *v = None;
            }
        }
        out
    }

    /// Values at interior knots in row-major order, erroring on undefined ones.
    pub fn interior_values(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (lin, (v, m)) in self.values.iter().zip(&self.mask).enumerate() {
            if *m == KnotClass::Interior {
                out.push(v.ok_or_else(|| Error::UndefinedValue(self.grid.multi(lin)))?);
            }
        }
        Ok(out)
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Integer shift `(Z(s) u)_m = u_{m+s}`; references outside the window are undefined.
    pub fn shifted(&self, shift: &MultiIndex) -> Self {
        let mut out = Self::with_mask(&self.grid, self.mask.clone());
        for lin in 0..self.values.len() {
            let target = &self.grid.multi(lin) + shift;
            if let Some(v) = self.get(&target) {
                out.values[lin] = Some(v);
            }
        }
        out
    }

    /// CSV export: header `i,j,...,x1,x2,...,value`, one row per knot in
    /// row-major order; undefined values are written as an empty field.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.grid.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..d).map(index_name).collect();
        header.extend((1..=d).map(|a| format!("x{a}")));
        header.push("value".into());
        w.write_record(&header)?;
        for lin in 0..self.values.len() {
            let idx = self.grid.multi(lin);
            let mut rec: Vec<String> = idx.0.iter().map(|k| k.to_string()).collect();
            rec.extend(self.grid.coord(&idx).iter().map(|x| x.to_string()));
            rec.push(self.values[lin].map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads values written by [`GridFunction::write_csv`] onto `grid`.
    pub fn read_csv<R: Read>(grid: &GridSpec, reader: R) -> Result<Self> {
        let d = grid.dim();
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 * d + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * d + 1, got: headers.len() });
        }
        let mut u = Self::undefined(grid);
        for rec in r.records() {
            let rec = rec?;
            let idx: Vec<i64> = (0..d)
                .map(|a| rec[a].trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidGrid(format!("bad index in CSV: {e}")))?;
            let lin = grid
                .linear(&idx)
                .ok_or_else(|| Error::InvalidGrid(format!("CSV index {idx:?} outside grid")))?;
            let field = rec[2 * d].trim();
            if !field.is_empty() {
                let v: f64 = field
                    .parse()
                    .map_err(|e| Error::InvalidGrid(format!("bad value in CSV: {e}")))?;
                u.set_linear(lin, v);
            }
        }
        Ok(u)
    }
}

fn index_name(axis: usize) -> String {
    const NAMES: [&str; 6] = ["i", "j", "k", "l", "m", "n"];
    NAMES.get(axis).map(|s| s.to_string()).unwrap_or_else(|| format!("i{axis}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// `U_i(r) u` (forward) or `V_i(r) u` (backward) with step `r h`.
///
/// Entries whose referenced knots are undefined or outside the window stay undefined.
pub fn finite_difference(
    u: &GridFunction,
    axis: usize,
    stride: usize,
    direction: Direction,
) -> Result<GridFunction> {
    let grid = u.grid();
    if axis >= grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: axis + 1 });
    }
    if stride == 0 {
        return Err(Error::InvalidGrid("stride must be >= 1".into()));
    }
    let step = stride as f64 * grid.h();
    let shift = MultiIndex::unit(grid.dim(), axis, stride as i64);
    let mut out = GridFunction::with_mask(grid, u.mask().to_vec());
    for lin in 0..grid.num_knots() {
        let m = grid.multi(lin);
        let pair = match direction {
            Direction::Forward => (u.get(&(&m + &shift)), u.get(&m)),
            Direction::Backward => (u.get(&m), u.get(&(&m - &shift))),
        };
        if let (Some(a), Some(b)) = pair {
            out.set_linear(lin, (a - b) / step);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(d: usize, n: usize) -> GridSpec {
        build_grid(d, &BoxDomain::unit(d), n).unwrap()
    }

    #[test]
    fn build_grid_n4() {
        let g = unit_grid(2, 4);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.num_knots(), 25);
        let mask = classify_knots(&g, &BoxDomain::unit(2));
        assert_eq!(mask.iter().filter(|m| **m == KnotClass::Interior).count(), 9);
        assert_eq!(g.coord(&MultiIndex::new(vec![1, 3])), vec![0.25, 0.75]);
    }

    #[test]
    fn build_grid_1d_n2_has_single_interior_knot() {
        let g = unit_grid(1, 2);
        let mask = classify_knots(&g, &BoxDomain::unit(1));
        let interior: Vec<f64> = (0..g.num_knots())
            .filter(|&l| mask[l] == KnotClass::Interior)
            .map(|l| g.coord(&g.multi(l))[0])
            .collect();
        assert_eq!(interior, vec![0.5]);
    }

    #[test]
    fn build_grid_n400_interior_count() {
        let g = unit_grid(2, 400);
        let mask = classify_knots(&g, &BoxDomain::unit(2));
        assert_eq!(mask.iter().filter(|m| **m == KnotClass::Interior).count(), 399 * 399);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(build_grid(2, &BoxDomain::unit(2), 1).is_err());
        let flat = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert!(build_grid(2, &flat, 4).is_err());
        let skew = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 0.3]);
        assert!(build_grid(2, &skew, 4).is_err());
    }

    #[test]
    fn classify_examples() {
        let g = unit_grid(2, 4);
        let mask = classify_knots(&g, &BoxDomain::unit(2));
        assert_eq!(mask[g.linear(&[1, 1]).unwrap()], KnotClass::Interior);
        assert_eq!(mask[g.linear(&[0, 2]).unwrap()], KnotClass::Boundary);
        let small = BoxDomain::new(vec![0.0, 0.0], vec![0.5, 0.5]);
        let mask = classify_knots(&g, &small);
        assert_eq!(mask[g.linear(&[3, 3]).unwrap()], KnotClass::Exterior);
        assert_eq!(mask[g.linear(&[2, 1]).unwrap()], KnotClass::Boundary);
    }

    #[test]
    fn linear_multi_roundtrip() {
        let g = build_grid(3, &BoxDomain::new(vec![0.0; 3], vec![1.0, 2.0, 0.5]), 4).unwrap();
        for lin in 0..g.num_knots() {
            assert_eq!(g.linear(&g.multi(lin).0), Some(lin));
        }
        assert_eq!(g.axis_stride(2), 1);
        assert_eq!(g.axis_stride(1), 3);
        assert_eq!(g.axis_stride(0), 9 * 3);
    }

    #[test]
    fn finite_difference_of_linear_is_slope() {
        let g = unit_grid(2, 8);
        let u = GridFunction::from_fn(&g, |x| 3.0 * x[0] - 2.0 * x[1] + 1.0);
        for r in 1..4 {
            let d1 = finite_difference(&u, 0, r, Direction::Forward).unwrap();
            let d2 = finite_difference(&u, 1, r, Direction::Backward).unwrap();
            for v in d1.values().iter().flatten() {
                assert!((v - 3.0).abs() < 1e-12);
            }
            for v in d2.values().iter().flatten() {
                assert!((v + 2.0).abs() < 1e-12);
            }
            // out-of-window references stay undefined
            assert_eq!(d1.defined_count(), (9 - r) * 9);
        }
    }

    #[test]
    fn finite_difference_of_constant_vanishes() {
        let g = unit_grid(2, 5);
        let u = GridFunction::from_fn(&g, |_| 7.5);
        let d = finite_difference(&u, 1, 2, Direction::Forward).unwrap();
        assert!(d.values().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn finite_difference_quadratic_hand_value() {
        let g = unit_grid(1, 4);
        let u = GridFunction::from_fn(&g, |x| x[0] * x[0]);
        let d = finite_difference(&u, 0, 2, Direction::Forward).unwrap();
        let v = d.get(&MultiIndex::new(vec![1])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn undefined_inputs_propagate() {
        let g = unit_grid(1, 4);
        let mut u = GridFunction::from_fn(&g, |x| x[0]);
        u.clear(2);
        let d = finite_difference(&u, 0, 1, Direction::Forward).unwrap();
        assert!(d.get(&MultiIndex::new(vec![1])).is_none());
        assert!(d.get(&MultiIndex::new(vec![2])).is_none());
        assert!(d.get(&MultiIndex::new(vec![0])).is_some());
    }

    #[test]
    fn subgrid_translates_partition_grid() {
        let g = unit_grid(2, 6);
        let ts = SubgridSpec::translates(&[3, 2]);
        assert_eq!(ts.len(), 6);
        for idx in g.knots() {
            assert_eq!(ts.iter().filter(|s| s.contains(&idx)).count(), 1);
        }
    }

    #[test]
    fn csv_roundtrip_is_bitwise() {
        let g = unit_grid(2, 2);
        let mut u = GridFunction::from_fn(&g, |x| (x[0] * 0.1 + x[1]).sin() / 3.0);
        u.clear(4);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,j,x1,x2,value\n"));
        assert_eq!(text.lines().count(), 10);
        let back = GridFunction::read_csv(&g, buf.as_slice()).unwrap();
        for (a, b) in u.values().iter().zip(back.values()) {
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
    }
}
