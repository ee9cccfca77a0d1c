//! Right-hand sides as measures (densities, segments, point masses and
//! divergence functionals), lumped onto knots by hat-function weighting.

use std::fmt;
use std::sync::Arc;

use crate::coeff::{ScalarFn, VectorFn};
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, GridFunction, GridSpec, KnotClass};
use crate::operator::SparseOperator;
use crate::quad::{gauss_legendre, hat_1d, hat_1d_derivative};

#[derive(Clone)]
pub struct DensityPiece {
    pub region: BoxDomain,
    pub density: ScalarFn,
}

/// Measure `ρ(x) dt` on the segment `{base + t e_axis : t ∈ [t0, t1]}`.
#[derive(Clone)]
pub struct LineMeasure {
    pub base: Vec<f64>,
    pub axis: usize,
    pub range: (f64, f64),
    pub density: ScalarFn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointMass {
    pub location: Vec<f64>,
    pub weight: f64,
}

/// `μ = div f` restricted to `region`, paired with test functions as `-(∇ψ|f)`.
#[derive(Clone)]
pub struct DivergencePiece {
    pub region: BoxDomain,
    pub flux: VectorFn,
}

#[derive(Clone, Default)]
pub struct MeasureSpec {
    pub densities: Vec<DensityPiece>,
    pub lines: Vec<LineMeasure>,
    pub points: Vec<PointMass>,
    pub divergences: Vec<DivergencePiece>,
}

impl fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasureSpec")
            .field("densities", &self.densities.iter().map(|d| &d.region).collect::<Vec<_>>())
            .field("lines", &self.lines.iter().map(|l| (&l.base, l.axis, l.range)).collect::<Vec<_>>())
            .field("points", &self.points)
            .field("divergences", &self.divergences.len())
            .finish()
    }
}

impl MeasureSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn density(mut self, region: BoxDomain, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.densities.push(DensityPiece { region, density: Arc::new(f) });
        self
    }

    pub fn line(
        mut self,
        base: Vec<f64>,
        axis: usize,
        range: (f64, f64),
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.lines.push(LineMeasure { base, axis, range, density: Arc::new(f) });
        self
    }

    pub fn point(mut self, location: Vec<f64>, weight: f64) -> Self {
        self.points.push(PointMass { location, weight });
        self
    }

    pub fn divergence(mut self, region: BoxDomain, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.divergences.push(DivergencePiece { region, flux: Arc::new(f) });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.densities.is_empty() && self.lines.is_empty() && self.points.is_empty() && self.divergences.is_empty()
    }
}

/// Dirichlet data `g` evaluated at boundary knots.
#[derive(Clone)]
pub struct BoundaryData {
    pub g: ScalarFn,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData(..)")
    }
}

impl BoundaryData {
    pub fn new(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { g: Arc::new(g) }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0)
    }

    /// Values at all non-interior knots of the grid.
    pub fn on_grid(&self, grid: &GridSpec, mask: &[KnotClass]) -> Result<GridFunction> {
        let mut u = GridFunction::with_mask(grid, mask.to_vec());
        for (l, m) in mask.iter().enumerate() {
            if *m != KnotClass::Interior {
                let v = (self.g)(&grid.coord(&grid.multi(l)));
                if !v.is_finite() {
                    return Err(Error::UndefinedValue(grid.multi(l)));
                }
                u.set_linear(l, v);
            }
        }
        Ok(u)
    }
}

/// Hat support geometry: knots of the window touched by a point, with hat values.
struct Hats<'a> {
    grid: &'a GridSpec,
    r: &'a [usize],
}

impl Hats<'_> {
    /// Per-axis candidate (index, value, derivative) triples for point `x`.
    fn axis_terms(&self, axis: usize, x: f64) -> Vec<(i64, f64, f64)> {
        let h = self.grid.h();
        let r = self.r[axis] as i64;
        let width = self.r[axis] as f64 * h;
        let t = (x - self.grid.origin()[axis]) / h;
        let lo = (t.floor() as i64 - r).max(0);
        let hi = (t.ceil() as i64 + r).min(self.grid.cells(axis) as i64);
        (lo..=hi)
            .filter_map(|k| {
                let xk = self.grid.coord_axis(axis, k);
                let v = hat_1d(x - xk, width);
                let dv = hat_1d_derivative(x - xk, width);
                (v != 0.0 || dv != 0.0).then_some((k, v, dv))
            })
            .collect()
    }

    /// Calls `f(lin, ψ_k(x), ∇ψ_k(x))` for every knot whose hat touches `x`.
    fn for_each(&self, x: &[f64], mut f: impl FnMut(usize, f64, &[f64])) {
        let d = x.len();
        let terms: Vec<Vec<(i64, f64, f64)>> = (0..d).map(|a| self.axis_terms(a, x[a])).collect();
        let mut idx = vec![0usize; d];
        let mut grad = vec![0.0; d];
        if terms.iter().any(|t| t.is_empty()) {
            return;
        }
        loop {
            let knot: Vec<i64> = (0..d).map(|a| terms[a][idx[a]].0).collect();
            let mut val = 1.0;
            for a in 0..d {
                val *= terms[a][idx[a]].1;
            }
            for (a, g) in grad.iter_mut().enumerate() {
                let mut p = terms[a][idx[a]].2;
                for b in 0..d {
                    if b != a {
                        p *= terms[b][idx[b]].1;
                    }
                }
                *g = p;
            }
            if let Some(lin) = self.grid.linear(&knot) {
                f(lin, val, &grad);
            }
            let mut a = d;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < terms[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
}

/// Breakpoints of the hat family along `axis` within `[lo, hi]`.
fn breakpoints(grid: &GridSpec, axis: usize, lo: f64, hi: f64) -> Vec<f64> {
    let h = grid.h();
    let o = grid.origin()[axis];
    let mut pts = vec![lo];
    let mut k = ((lo - o) / h).floor() as i64 + 1;
    loop {
        let x = o + h * k as f64;
        if x >= hi - 1e-14 * h.max(1.0) {
            break;
        }
        if x > lo + 1e-14 * h.max(1.0) {
            pts.push(x);
        }
        k += 1;
    }
    pts.push(hi);
    pts
}

/// Tensor Gauss points over a box split at grid lines: `(point, weight)` pairs.
pub(crate) fn split_box_quadrature(grid: &GridSpec, region: &BoxDomain, order: usize) -> Vec<(Vec<f64>, f64)> {
    let d = grid.dim();
    let (gx, gw) = gauss_legendre(order);
    let per_axis: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|a| {
            let bp = breakpoints(grid, a, region.lo[a], region.hi[a]);
            let mut v = Vec::new();
            for w in bp.windows(2) {
                let (l, r) = (w[0], w[1]);
                let half = 0.5 * (r - l);
                for (x, wt) in gx.iter().zip(&gw) {
                    v.push((0.5 * (l + r) + half * x, half * wt));
                }
            }
            v
        })
        .collect();
    let mut out = vec![(Vec::with_capacity(d), 1.0)];
    for axis_pts in &per_axis {
        let mut next = Vec::with_capacity(out.len() * axis_pts.len());
        for (p, w) in &out {
            for (x, wx) in axis_pts {
                let mut q = p.clone();
                q.push(*x);
                next.push((q, w * wx));
            }
        }
        out = next;
    }
    out
}

fn clip(region: &BoxDomain, domain: &BoxDomain) -> Option<BoxDomain> {
    let lo: Vec<f64> = region.lo.iter().zip(&domain.lo).map(|(a, b)| a.max(*b)).collect();
    let hi: Vec<f64> = region.hi.iter().zip(&domain.hi).map(|(a, b)| a.min(*b)).collect();
    lo.iter().zip(&hi).all(|(l, h)| l < h).then_some(BoxDomain { lo, hi })
}

/// `μ_k = h^{-d} ∫ ψ_k dμ` at every knot of the window, with hats of width `r_i h`.
pub fn discretize_measure(mu: &MeasureSpec, grid: &GridSpec, strides: &[usize]) -> Result<GridFunction> {
    let d = grid.dim();
    if strides.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: strides.len() });
    }
    let domain = grid.bounding_box();
    let hats = Hats { grid, r: strides };
    let mut acc = vec![0.0; grid.num_knots()];
    for piece in &mu.densities {
        if piece.region.dim() != d {
            return Err(Error::InvalidMeasure("density box dimension mismatch".into()));
        }
        let Some(region) = clip(&piece.region, &domain) else { continue };
        for (x, w) in split_box_quadrature(grid, &region, 3) {
            let f = (piece.density)(&x);
            hats.for_each(&x, |lin, psi, _| acc[lin] += w * f * psi);
        }
    }
    for line in &mu.lines {
        add_line(line, grid, &domain, &hats, &mut acc)?;
    }
    for p in &mu.points {
        if p.location.len() != d || !domain.contains_closed(&p.location) {
            return Err(Error::InvalidMeasure(format!("point mass at {:?} outside the domain", p.location)));
        }
        hats.for_each(&p.location, |lin, psi, _| acc[lin] += p.weight * psi);
    }
    for piece in &mu.divergences {
        let Some(region) = clip(&piece.region, &domain) else { continue };
        for (x, w) in split_box_quadrature(grid, &region, 3) {
            let f = (piece.flux)(&x);
            hats.for_each(&x, |lin, _, grad| {
                let s: f64 = grad.iter().zip(&f).map(|(g, fi)| g * fi).sum();
                acc[lin] -= w * s;
            });
        }
    }
    let scale = grid.h().powi(d as i32).recip();
    let mut out = GridFunction::undefined(grid);
    for (l, v) in acc.into_iter().enumerate() {
        out.set_linear(l, v * scale);
    }
    Ok(out)
}

fn add_line(line: &LineMeasure, grid: &GridSpec, domain: &BoxDomain, hats: &Hats<'_>, acc: &mut [f64]) -> Result<()> {
    let d = grid.dim();
    let (t0, t1) = line.range;
    let mut lo = line.base.clone();
    let mut hi = line.base.clone();
    if line.base.len() != d || line.axis >= d || !(t0 <= t1) {
        return Err(Error::InvalidMeasure("malformed segment".into()));
    }
    lo[line.axis] = t0;
    hi[line.axis] = t1;
    if !domain.contains_closed(&lo) || !domain.contains_closed(&hi) {
        return Err(Error::InvalidMeasure(format!("segment {lo:?}..{hi:?} leaves the domain")));
    }
    let (gx, gw) = gauss_legendre(3);
    let bp = breakpoints(grid, line.axis, t0, t1);
    let mut x = line.base.clone();
    for seg in bp.windows(2) {
        let (l, r) = (seg[0], seg[1]);
        let half = 0.5 * (r - l);
        for (g, wt) in gx.iter().zip(&gw) {
            x[line.axis] = 0.5 * (l + r) + half * g;
            let rho = (line.density)(&x);
            let w = half * wt * rho;
            hats.for_each(&x, |lin, psi, _| acc[lin] += w * psi);
        }
    }
    Ok(())
}

/// `rhs_k = μ_k - Σ_{l∈∂} A_kl g(x_l)` on interior rows.
pub fn lift_boundary(op: &SparseOperator, g: &BoundaryData, mu: &GridFunction) -> Result<Vec<f64>> {
    let gb = g.on_grid(op.grid(), op.mask())?;
    let b = op.boundary_apply(&gb)?;
    let m = op.gather(mu)?;
    Ok(m.iter().zip(&b).map(|(a, c)| a - c).collect())
}

/// `A u*` for the piecewise-constant example field with `u* = x1 x2`:
/// density `-2ρ` on the inner square plus flux jumps on its four edges.
pub fn example6_rhs(rho: f64, inner: &BoxDomain) -> MeasureSpec {
    let mut mu = MeasureSpec::zero();
    if rho == 0.0 {
        return mu;
    }
    mu = mu.density(inner.clone(), move |_| -2.0 * rho);
    for axis in 0..2 {
        let other = 1 - axis;
        for (pos, sign) in [(inner.lo[axis], -1.0), (inner.hi[axis], 1.0)] {
            let mut base = vec![0.0; 2];
            base[axis] = pos;
            let dens = sign * rho * pos;
            mu = mu.line(base, other, (inner.lo[other], inner.hi[other]), move |_| dens);
        }
    }
    mu
}
