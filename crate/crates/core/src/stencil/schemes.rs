use serde::{Deserialize, Serialize};

use super::{Accum, Family, Stencil, Variant};
use crate::coeff::{CoefficientField, SymTensor};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantVariant {
    Cross,
    Extended,
}

/// Stride pair used by one coordinate plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneStrides {
    pub axes: (usize, usize),
    pub strides: (usize, usize),
}

fn point(x: &[f64], h: f64, terms: &[(usize, f64)]) -> Vec<f64> {
    let mut p = x.to_vec();
    for &(a, c) in terms {
        p[a] += h * c;
    }
    p
}

fn offset(dim: usize, terms: &[(usize, i64)]) -> MultiIndex {
    let mut o = MultiIndex::zeros(dim);
    for &(a, c) in terms {
        o.0[a] += c;
    }
    o
}

/// Couplings of one plane `(i, j)` with the diagonal entries scaled by `split`.
#[allow(clippy::too_many_arguments)]
fn plane_terms(
    acc: &mut Accum,
    coef: &dyn Fn(&[f64]) -> SymTensor,
    x: &[f64],
    h: f64,
    (i, j): (usize, usize),
    r: &[usize],
    split: f64,
    family: Family,
    variant: Variant,
) {
    let d = x.len();
    let (ri, rj) = (r[i] as f64, r[j] as f64);
    let (ii, ij) = (r[i] as i64, r[j] as i64);
    let h2 = h * h;
    let a = |terms: &[(usize, f64)]| coef(&point(x, h, terms));
    match family {
        Family::Extended => {
            // s = -1 flips the second axis of every evaluation point for the SECOND variant.
            let s = match variant {
                Variant::First => 1.0,
                Variant::Second => -1.0,
            };
            let bracket_pt = |shift: &[(usize, f64)]| {
                let mut t = vec![(i, 0.5 * ri), (j, 0.5 * s * rj)];
                t.extend_from_slice(shift);
                a(&t).get(i, j).abs()
            };
            let wi_plus = split * a(&[(i, 0.5), (j, 0.5 * s)]).get(i, i) - (ri / rj) * bracket_pt(&[]);
            let wi_minus =
                split * a(&[(i, -0.5), (j, 0.5 * s)]).get(i, i) - (ri / rj) * bracket_pt(&[(i, -1.0)]);
            let (jp_shift, jm_shift): (Vec<(usize, f64)>, Vec<(usize, f64)>) = match variant {
                Variant::First => (vec![], vec![(j, -1.0)]),
                Variant::Second => (vec![(j, 1.0)], vec![]),
            };
            let wj_plus =
                split * a(&[(i, 0.5), (j, 0.5)]).get(j, j) - (rj / ri) * bracket_pt(&jp_shift);
            let wj_minus =
                split * a(&[(i, 0.5), (j, -0.5)]).get(j, j) - (rj / ri) * bracket_pt(&jm_shift);
            acc.couple(offset(d, &[(i, 1)]), wi_plus / h2);
            acc.couple(offset(d, &[(i, -1)]), wi_minus / h2);
            acc.couple(offset(d, &[(j, 1)]), wj_plus / h2);
            acc.couple(offset(d, &[(j, -1)]), wj_minus / h2);
            let sj = -s as i64;
            let corner = 1.0 / (ri * rj * h2);
            let cp = a(&[(i, 0.5 * ri), (j, -0.5 * s * rj)]).get(i, j).abs();
            let cm = a(&[(i, -0.5 * ri), (j, 0.5 * s * rj)]).get(i, j).abs();
            acc.couple(offset(d, &[(i, ii), (j, sj * ij)]), corner * cp);
            acc.couple(offset(d, &[(i, -ii), (j, -sj * ij)]), corner * cm);
        }
        Family::Standard => {
            // a^{αβ} = a(x + (h/2)(α r_i e_i + β r_j e_j))
            let ab = |al: f64, be: f64| a(&[(i, 0.5 * al * ri), (j, 0.5 * be * rj)]);
            let beta_i = match variant {
                Variant::First => 1.0,
                Variant::Second => -1.0,
            };
            for al in [1.0, -1.0] {
                let t = ab(al, beta_i);
                let w = (split * t.get(i, i) / ri - t.get(i, j).abs() / rj) / (h2 * ri);
                acc.couple(offset(d, &[(i, al as i64 * ii)]), w);
                let t = ab(1.0, al);
                let w = (split * t.get(j, j) / rj - t.get(i, j).abs() / ri) / (h2 * rj);
                acc.couple(offset(d, &[(j, al as i64 * ij)]), w);
            }
            let corner = 1.0 / (ri * rj * h2);
            for al in [1.0, -1.0] {
                let (be, oj) = match variant {
                    Variant::First => (-al, -(al as i64) * ij),
                    Variant::Second => (al, al as i64 * ij),
                };
                let t = ab(al, be);
                acc.couple(offset(d, &[(i, al as i64 * ii), (j, oj)]), corner * t.get(i, j).abs());
            }
        }
    }
}

/// Raw (unclamped) stencil from a coefficient closure, summing over all planes.
pub(crate) fn build_stencil(
    coef: &dyn Fn(&[f64]) -> SymTensor,
    center: MultiIndex,
    x: &[f64],
    h: f64,
    r: &[usize],
    family: Family,
    variant: &dyn Fn((usize, usize)) -> Variant,
) -> Stencil {
    let d = x.len();
    let mut acc = Accum::new(d);
    if d == 1 {
        let (step, c) = match family {
            Family::Standard => (r[0] as i64, r[0] as f64),
            Family::Extended => (1, 1.0),
        };
        for sgn in [1.0, -1.0] {
            let a = coef(&point(x, h, &[(0, 0.5 * sgn * c)])).get(0, 0);
            acc.couple(offset(1, &[(0, sgn as i64 * step)]), a / (c * c * h * h));
        }
    } else {
        let split = 1.0 / (d - 1) as f64;
        for i in 0..d {
            for j in i + 1..d {
                plane_terms(&mut acc, coef, x, h, (i, j), r, split, family, variant((i, j)));
            }
        }
    }
    Stencil::from_map(center, x.to_vec(), h, r.to_vec(), acc.into_map())
}

/// Rebuilds with reduced strides while a nonzero entry reaches outside the grid window.
pub(crate) fn with_clamping(
    grid: &GridSpec,
    knot: &MultiIndex,
    r: &[usize],
    build: impl Fn(&[usize]) -> Stencil,
) -> Result<Stencil> {
    let mut r = r.to_vec();
    let mut clamped = false;
    loop {
        let mut st = build(&r);
        let bad = st
            .off_center()
            .map(|(o, _)| knot + o)
            .find(|t| !grid.in_window(&t.0));
        match bad {
            None => {
                st.clamped = clamped;
                return Ok(st);
            }
            Some(target) => {
                let mut reduced = false;
                for a in 0..grid.dim() {
                    let k = knot.0[a];
                    let n = grid.cells(a) as i64;
                    if target.0[a] < 0 || target.0[a] > n {
                        let room = k.min(n - k).max(1) as usize;
                        let next = room.min(r[a].saturating_sub(1)).max(1);
                        if next < r[a] {
                            r[a] = next;
                            reduced = true;
                        }
                    }
                }
                if !reduced {
                    return Err(Error::StencilExitsDomain { knot: knot.clone(), target });
                }
                clamped = true;
            }
        }
    }
}

/// Constant-coefficient stencil centred at the zero knot; corners per plane follow the sign of `a_ij`.
pub fn constant_stencil(a: &SymTensor, r: &[usize], h: f64, variant: ConstantVariant) -> Stencil {
    let d = a.dim();
    let family = match variant {
        ConstantVariant::Cross => Family::Standard,
        ConstantVariant::Extended => Family::Extended,
    };
    let coef = |_: &[f64]| a.clone();
    let pick = |(i, j): (usize, usize)| Variant::for_sign(a.get(i, j));
    build_stencil(&coef, MultiIndex::zeros(d), &vec![0.0; d], grid_h(h), r, family, &pick)
}

fn grid_h(h: f64) -> f64 {
    assert!(h > 0.0, "step must be positive");
    h
}

/// Extended stencil with the same variant in every plane.
pub fn extended_stencil(
    field: &CoefficientField,
    grid: &GridSpec,
    knot: &MultiIndex,
    r: &[usize],
    variant: Variant,
) -> Result<Stencil> {
    field_stencil(field, grid, knot, r, Family::Extended, &|_| variant)
}

/// Coarse-grid stencil; all offsets are multiples of the strides.
pub fn standard_stencil(
    field: &CoefficientField,
    grid: &GridSpec,
    knot: &MultiIndex,
    r: &[usize],
    variant: Variant,
) -> Result<Stencil> {
    field_stencil(field, grid, knot, r, Family::Standard, &|_| variant)
}

pub(crate) fn field_stencil(
    field: &CoefficientField,
    grid: &GridSpec,
    knot: &MultiIndex,
    r: &[usize],
    family: Family,
    variant: &dyn Fn((usize, usize)) -> Variant,
) -> Result<Stencil> {
    check_knot(grid, knot, r)?;
    let x = grid.coord(knot);
    let coef = |p: &[f64]| field.tensor(p);
    with_clamping(grid, knot, r, |rr| {
        build_stencil(&coef, knot.clone(), &x, grid.h(), rr, family, variant)
    })
}

fn check_knot(grid: &GridSpec, knot: &MultiIndex, r: &[usize]) -> Result<()> {
    if knot.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: knot.dim() });
    }
    if r.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: r.len() });
    }
    if r.iter().any(|&s| s == 0) {
        return Err(Error::InvalidGrid("strides must be >= 1".into()));
    }
    Ok(())
}

/// Sum of plane stencils with per-plane variants; plane strides must agree on shared axes.
pub fn compose_highdim(
    field: &CoefficientField,
    grid: &GridSpec,
    knot: &MultiIndex,
    planes: &[PlaneStrides],
    kinds: &[((usize, usize), Variant)],
    family: Family,
) -> Result<Stencil> {
    let r = global_strides(grid.dim(), planes)?;
    let lookup = |axes: (usize, usize)| {
        kinds
            .iter()
            .find(|(a, _)| *a == axes)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| Variant::for_sign(field.entry(axes.0, axes.1, &grid.coord(knot))))
    };
    field_stencil(field, grid, knot, &r, family, &lookup)
}

/// Collapses a plane stride table into one stride per axis, rejecting conflicts.
pub fn global_strides(dim: usize, planes: &[PlaneStrides]) -> Result<Vec<usize>> {
    let mut r: Vec<Option<usize>> = vec![None; dim];
    for p in planes {
        let (i, j) = p.axes;
        if i >= dim || j >= dim || i == j {
            return Err(Error::Config(format!("invalid plane axes ({i}, {j})")));
        }
        for (axis, s) in [(i, p.strides.0), (j, p.strides.1)] {
            match r[axis] {
                Some(prev) if prev != s => {
                    return Err(Error::InconsistentStrides { axis, first: prev, second: s })
                }
                _ => r[axis] = Some(s),
            }
        }
    }
    Ok(r.into_iter().map(|s| s.unwrap_or(1)).collect())
}

/// Donor-cell discretisation of `Σ_j ∂_j(b_j u)` plus `c(x)` on the center.
pub fn upwind_stencil(field: &CoefficientField, grid: &GridSpec, knot: &MultiIndex) -> Stencil {
    let d = grid.dim();
    let h = grid.h();
    let x = grid.coord(knot);
    let mut acc = Accum::new(d);
    let zero = MultiIndex::zeros(d);
    if field.has_drift() {
        for j in 0..d {
            let bp = field.drift(&point(&x, h, &[(j, 0.5)]))[j];
            let bm = field.drift(&point(&x, h, &[(j, -0.5)]))[j];
            acc.add(zero.clone(), (bp.max(0.0) - bm.min(0.0)) / h);
            acc.add(offset(d, &[(j, 1)]), bp.min(0.0) / h);
            acc.add(offset(d, &[(j, -1)]), -bm.max(0.0) / h);
        }
    }
    acc.add(zero, field.reaction(&x));
    Stencil::from_map(knot.clone(), x, h, vec![1; d], acc.into_map())
}
