//! Compressed-row matrices and deterministic parallel vector kernels.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Square matrix in compressed sparse row format with sorted, unique columns per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed; explicit zeros are kept.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    /// Rows given as sorted `(col, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(|r| r.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows = a
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(c, v)| (c, *v)).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|p| v[p]).unwrap_or(0.0)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Adds `shift` to every diagonal entry (inserting missing ones).
    pub fn shifted(&self, shift: f64) -> Self {
        if shift == 0.0 {
            return self.clone();
        }
        let mut t: Vec<(usize, usize, f64)> = self.triplets().collect();
        t.extend((0..self.n).map(|i| (i, i, shift)));
        Self::from_triplets(self.n, t)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &w)| (i, j, w))
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n, self.triplets().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let t = self.transpose();
        if t.cols != self.cols || t.row_ptr != self.row_ptr {
            return false;
        }
        self.vals.iter().zip(&t.vals).all(|(a, b)| (a - b).abs() <= rel_tol * scale)
    }

    /// `y = A x`, parallel over rows.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * CHUNK;
            for (o, yi) in chunk.iter_mut().enumerate() {
                let (c, v) = self.row(base + o);
                let mut s = 0.0;
                for (&j, &w) in c.iter().zip(v) {
                    s += w * x[j];
                }
                *yi = s;
            }
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, j, _) in self.triplets() {
            if j < i {
                lo = lo.max(i - j);
            } else {
                hi = hi.max(j - i);
            }
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.triplets() {
            a[i][j] += v;
        }
        a
    }
}

/// Sum with a fixed chunking, so the result does not depend on the thread count.
pub fn det_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(n);
            (c * CHUNK..end).map(&f).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    det_sum(a.len(), |i| a[i] * b[i])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    det_sum(a.len(), |i| a[i].abs())
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}
