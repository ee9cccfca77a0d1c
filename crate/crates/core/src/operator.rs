//! Assembly of per-knot stencils into an interior-knot system matrix with
//! separate Dirichlet couplings, plus structural verification.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{sign_partition, CoefficientField, SignPartition};
use crate::error::{Error, Result};
use crate::grid::{classify_knots, GridFunction, GridSpec, KnotClass, MultiIndex};
use crate::linalg::{det_sum, CsrMatrix};
use crate::stencil::{upwind_stencil, SchemeContext, SchemeRegistry, StrideMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub scheme: String,
    pub strides: Vec<usize>,
    /// Band half-width for labelling `a_ij` as positive or negative.
    pub threshold: f64,
    pub r_max: usize,
}

impl AssemblyOptions {
    pub fn new(scheme: &str, strides: Vec<usize>) -> Self {
        Self { scheme: scheme.into(), strides, threshold: 0.5, r_max: 8 }
    }
}

/// System matrix over interior knots (row-major order) and its couplings to boundary knots.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    grid: GridSpec,
    mask: Vec<KnotClass>,
    knot_of_row: Vec<usize>,
    row_of_knot: Vec<Option<usize>>,
    matrix: CsrMatrix,
    boundary: Vec<Vec<(usize, f64)>>,
    symmetric: bool,
    scheme: String,
    strides: StrideMap,
    flagged_rows: Vec<usize>,
    clamped_rows: Vec<usize>,
    hat_strides: Vec<usize>,
}

/// Builds the operator for `field` on the interior of the grid's bounding box.
pub fn assemble(field: &CoefficientField, grid: &GridSpec, opts: &AssemblyOptions) -> Result<SparseOperator> {
    let d = grid.dim();
    if field.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: field.dim() });
    }
    if opts.strides.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: opts.strides.len() });
    }
    if opts.strides.iter().any(|&r| r == 0 || r > opts.r_max) {
        return Err(Error::Config(format!(
            "strides {:?} must lie in [1, {}]",
            opts.strides, opts.r_max
        )));
    }
    let registry = SchemeRegistry::default();
    let scheme = registry.get(&opts.scheme)?;
    let partitions: Vec<SignPartition> = if scheme.uses_partition() {
        let mut v = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                v.push(sign_partition(field, grid, (i, j), opts.threshold));
            }
        }
        v
    } else {
        Vec::new()
    };
    let ctx = SchemeContext { field, grid, strides: opts.strides.clone(), partitions };
    let mask = classify_knots(grid, &grid.bounding_box());
    let knot_of_row: Vec<usize> =
        (0..grid.num_knots()).filter(|&l| mask[l] == KnotClass::Interior).collect();
    let mut row_of_knot = vec![None; grid.num_knots()];
    for (r, &l) in knot_of_row.iter().enumerate() {
        row_of_knot[l] = Some(r);
    }
    let lower_order = field.has_drift() || field.has_reaction();
    let rows: Vec<Result<RowData>> = knot_of_row
        .par_iter()
        .map(|&lin| {
            let knot = grid.multi(lin);
            let mut st = scheme.stencil(&ctx, &knot)?;
            if lower_order {
                st = st.merged(&upwind_stencil(field, grid, &knot));
            }
            let mut inner = Vec::with_capacity(st.len());
            let mut bnd = Vec::new();
            for (target, w) in st.targets() {
                let tl = grid
                    .linear(&target.0)
                    .ok_or_else(|| Error::StencilExitsDomain { knot: knot.clone(), target: target.clone() })?;
                match row_of_knot[tl] {
                    Some(col) => inner.push((col, w)),
                    None => bnd.push((tl, w)),
                }
            }
            inner.sort_by_key(|e| e.0);
            bnd.sort_by_key(|e| e.0);
            Ok(RowData { inner, bnd, flagged: st.is_flagged(), clamped: st.clamped, strides: st.strides })
        })
        .collect();
    let mut inner_rows = Vec::with_capacity(rows.len());
    let mut boundary = Vec::with_capacity(rows.len());
    let mut flagged_rows = Vec::new();
    let mut clamped_rows = Vec::new();
    let mut per_knot = vec![opts.strides.clone(); grid.num_knots()];
    for (r, row) in rows.into_iter().enumerate() {
        let row = row?;
        if row.flagged {
            flagged_rows.push(r);
        }
        if row.clamped {
            clamped_rows.push(r);
        }
        per_knot[knot_of_row[r]] = row.strides;
        inner_rows.push(row.inner);
        boundary.push(row.bnd);
    }
    let matrix = CsrMatrix::from_rows(inner_rows);
    let symmetric = matrix.is_symmetric(1e-12);
    Ok(SparseOperator {
        grid: grid.clone(),
        mask,
        knot_of_row,
        row_of_knot,
        matrix,
        boundary,
        symmetric,
        scheme: opts.scheme.clone(),
        strides: StrideMap { r_max: opts.r_max, per_knot },
        flagged_rows,
        clamped_rows,
        hat_strides: scheme.hat_strides(&opts.strides),
    })
}

struct RowData {
    inner: Vec<(usize, f64)>,
    bnd: Vec<(usize, f64)>,
    flagged: bool,
    clamped: bool,
    strides: Vec<usize>,
}

impl SparseOperator {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mask(&self) -> &[KnotClass] {
        &self.mask
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_rows(&self) -> usize {
        self.knot_of_row.len()
    }

    pub fn knot_of_row(&self, row: usize) -> MultiIndex {
        self.grid.multi(self.knot_of_row[row])
    }

    pub fn knot_lin_of_row(&self, row: usize) -> usize {
        self.knot_of_row[row]
    }

    pub fn row_of_knot(&self, lin: usize) -> Option<usize> {
        self.row_of_knot[lin]
    }

    /// Couplings of a row to boundary knots (linear knot index, weight).
    pub fn boundary_couplings(&self, row: usize) -> &[(usize, f64)] {
        &self.boundary[row]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn strides(&self) -> &StrideMap {
        &self.strides
    }

    /// Strides of the hat functions matching the scheme (unit for extended schemes).
    pub fn hat_strides(&self) -> &[usize] {
        &self.hat_strides
    }

    /// Rows whose stencil has a positive off-center weight or negative center.
    pub fn flagged_rows(&self) -> &[usize] {
        &self.flagged_rows
    }

    pub fn clamped_rows(&self) -> &[usize] {
        &self.clamped_rows
    }

    /// Row `row` as `(column knot, weight)` over interior and boundary columns.
    pub fn row_entries(&self, row: usize) -> Vec<(MultiIndex, f64)> {
        let (c, v) = self.matrix.row(row);
        let mut out: Vec<(MultiIndex, f64)> =
            c.iter().zip(v).map(|(&j, &w)| (self.knot_of_row(j), w)).collect();
        out.extend(self.boundary[row].iter().map(|&(l, w)| (self.grid.multi(l), w)));
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Interior values of `u` in row order.
    pub fn gather(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.knot_of_row.iter().map(|&l| u.get_linear(l).ok_or_else(|| Error::UndefinedValue(self.grid.multi(l)))).collect()
    }

    /// Grid function carrying `x` at interior knots and `boundary` (if any) elsewhere.
    pub fn scatter(&self, x: &[f64], boundary: Option<&GridFunction>) -> GridFunction {
        let mut u = GridFunction::with_mask(&self.grid, self.mask.clone());
        if let Some(b) = boundary {
            for l in 0..self.grid.num_knots() {
                if self.mask[l] != KnotClass::Interior {
                    if let Some(v) = b.get_linear(l) {
                        u.set_linear(l, v);
                    }
                }
            }
        }
        for (r, &l) in self.knot_of_row.iter().enumerate() {
            u.set_linear(l, x[r]);
        }
        u
    }

    /// Nodal interior vector of `f`.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.knot_of_row.iter().map(|&l| f(&self.grid.coord(&self.grid.multi(l)))).collect()
    }

    /// `Σ_l A_kl u_l` over interior and boundary columns, per interior row.
    pub fn apply_vec(&self, u: &GridFunction) -> Result<Vec<f64>> {
        let x = self.gather(u)?;
        let mut y = self.matrix.apply(&x);
        for (r, yr) in y.iter_mut().enumerate() {
            for &(l, w) in &self.boundary[r] {
                let v = u.get_linear(l).ok_or_else(|| Error::UndefinedValue(self.grid.multi(l)))?;
                *yr += w * v;
            }
        }
        Ok(y)
    }

    /// Boundary contribution `Σ_{l∈∂} A_kl g_l` per row.
    pub fn boundary_apply(&self, g: &GridFunction) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_rows()];
        for (r, o) in out.iter_mut().enumerate() {
            for &(l, w) in &self.boundary[r] {
                let v = g.get_linear(l).ok_or_else(|| Error::UndefinedValue(self.grid.multi(l)))?;
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// `Σ_i x_i y_i` in the deterministic chunked order.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        det_sum(x.len(), |i| x[i] * y[i])
    }

    /// Coordinate-format export `row col value` over interior rows and columns,
    /// followed by boundary couplings as `row b<knot> value`.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rows {} nnz {}", self.num_rows(), self.matrix.nnz())?;
        for (i, j, v) in self.matrix.triplets() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        for (r, b) in self.boundary.iter().enumerate() {
            for (l, v) in b {
                writeln!(w, "{r} b{l} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// `(Au)_k` at interior knots as a grid function.
pub fn apply(op: &SparseOperator, u: &GridFunction) -> Result<GridFunction> {
    let y = op.apply_vec(u)?;
    let mut out = GridFunction::with_mask(op.grid(), op.mask().to_vec());
    for (r, v) in y.iter().enumerate() {
        out.set_linear(op.knot_lin_of_row(r), *v);
    }
    Ok(out)
}

/// `Σ_k v_k (Au)_k` over interior knots.
pub fn form(v: &GridFunction, op: &SparseOperator, u: &GridFunction) -> Result<f64> {
    let au = op.apply_vec(u)?;
    let vv = op.gather(v)?;
    Ok(op.inner(&vv, &au))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeDiagonal,
    PositiveOffDiagonal,
    NegativeColumnSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub row: MultiIndex,
    pub col: Option<MultiIndex>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub is_compartmental: bool,
    pub violations: Vec<Violation>,
    pub is_positive_type: bool,
    pub positive_type_violations: Vec<Violation>,
    pub is_irreducible: bool,
    pub sigma_sq: f64,
    pub min_column_sum: f64,
    pub min_row_sum: f64,
    pub rows: usize,
    pub nnz: usize,
    pub symmetric: bool,
    pub clamped_rows: usize,
}

impl StructureReport {
    /// Distinct row knots carrying a violation of the given kind.
    pub fn violating_rows(&self, kind: ViolationKind) -> Vec<MultiIndex> {
        let mut v: Vec<MultiIndex> =
            self.violations.iter().filter(|x| x.kind == kind).map(|x| x.row.clone()).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Checks the compartmental sign pattern (boundary couplings included among
/// off-diagonals; column sums over the interior block), positive type via row
/// sums, and strong connectivity of the interior sparsity graph.
pub fn structure_check(op: &SparseOperator) -> StructureReport {
    let a = op.matrix();
    let n = a.n();
    let diag = a.diag();
    let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut violations = Vec::new();
    let mut positive_type_violations = Vec::new();
    let mut col_sum = vec![0.0; n];
    let mut min_row_sum = f64::INFINITY;
    for i in 0..n {
        let (c, v) = a.row(i);
        let mut row_sum = 0.0;
        for (&j, &w) in c.iter().zip(v) {
            col_sum[j] += w;
            row_sum += w;
            if i == j {
                if w < -tol {
                    violations.push(Violation { kind: ViolationKind::NegativeDiagonal, row: op.knot_of_row(i), col: None, value: w });
                }
            } else if w > tol {
                violations.push(Violation {
                    kind: ViolationKind::PositiveOffDiagonal,
                    row: op.knot_of_row(i),
                    col: Some(op.knot_of_row(j)),
                    value: w,
                });
            }
        }
        for &(l, w) in op.boundary_couplings(i) {
            if w > tol {
                violations.push(Violation {
                    kind: ViolationKind::PositiveOffDiagonal,
                    row: op.knot_of_row(i),
                    col: Some(op.grid().multi(l)),
                    value: w,
                });
            }
        }
        min_row_sum = min_row_sum.min(row_sum);
        if row_sum < -tol {
            positive_type_violations.push(Violation {
                kind: ViolationKind::NegativeColumnSum,
                row: op.knot_of_row(i),
                col: None,
                value: row_sum,
            });
        }
    }
    let sign_ok = violations.is_empty();
    let mut min_column_sum = f64::INFINITY;
    for (j, s) in col_sum.iter().enumerate() {
        min_column_sum = min_column_sum.min(*s);
        if *s < -tol {
            violations.push(Violation { kind: ViolationKind::NegativeColumnSum, row: op.knot_of_row(j), col: None, value: *s });
        }
    }
    let h2 = op.grid().h() * op.grid().h();
    StructureReport {
        is_compartmental: violations.is_empty(),
        is_positive_type: sign_ok && positive_type_violations.is_empty(),
        violations,
        positive_type_violations,
        is_irreducible: strongly_connected(a),
        sigma_sq: diag.iter().fold(0.0f64, |m, v| m.max(h2 * v)),
        min_column_sum: if n == 0 { 0.0 } else { min_column_sum },
        min_row_sum: if n == 0 { 0.0 } else { min_row_sum },
        rows: n,
        nnz: a.nnz(),
        symmetric: op.is_symmetric(),
        clamped_rows: op.clamped_rows().len(),
    }
}

/// Every node reachable from node 0 along edges and along reversed edges.
pub fn strongly_connected(a: &CsrMatrix) -> bool {
    let n = a.n();
    if n == 0 {
        return true;
    }
    let reach = |m: &CsrMatrix| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            let (c, v) = m.row(i);
            for (&j, &w) in c.iter().zip(v) {
                if w != 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    };
    reach(a) && reach(&a.transpose())
}
