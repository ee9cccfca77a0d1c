use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Largest system the direct solver accepts.
pub const DIRECT_LIMIT: usize = 20_000;

/// Banded LU factorization without pivoting.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    lo: usize,
    hi: usize,
    /// Row `i` holds columns `i - lo ..= i + hi`.
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        if n > DIRECT_LIMIT {
            return Err(Error::SizeLimit { size: n, limit: DIRECT_LIMIT });
        }
        let (lo, hi) = a.bandwidth();
        let w = lo + hi + 1;
        let mut band = vec![0.0; n * w];
        let mut scale = 0.0f64;
        for (i, j, v) in a.triplets() {
            band[i * w + (j + lo - i)] += v;
            scale = scale.max(v.abs());
        }
        let tiny = scale * f64::EPSILON * 16.0;
        for k in 0..n {
            let pivot = band[k * w + lo];
            if !(pivot.abs() > tiny) {
                return Err(Error::SingularMatrix { row: k, pivot });
            }
            let jmax = (k + hi).min(n - 1);
            for i in (k + 1)..=(k + lo).min(n - 1) {
                let ik = i * w + (k + lo - i);
                let l = band[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                band[ik] = l;
                for j in (k + 1)..=jmax {
                    band[i * w + (j + lo - i)] -= l * band[k * w + (j + lo - k)];
                }
            }
        }
        Ok(Self { n, lo, hi, band })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: rhs.len() });
        }
        let (n, lo, hi) = (self.n, self.lo, self.hi);
        let w = lo + hi + 1;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(lo)..i {
                s -= self.band[i * w + (k + lo - i)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..=(i + hi).min(n - 1) {
                s -= self.band[i * w + (j + lo - i)] * x[j];
            }
            x[i] = s / self.band[i * w + lo];
        }
        Ok(x)
    }
}

pub fn direct_solve(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if a.n() != rhs.len() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: rhs.len() });
    }
    BandedLu::factor(a)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal() {
        let a = CsrMatrix::from_dense(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        let x = direct_solve(&a, &[1.0, 0.0, 1.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn nonsymmetric_banded() {
        let d = vec![
            vec![4.0, -1.0, 0.0, -2.0],
            vec![-0.5, 4.0, -1.0, 0.0],
            vec![0.0, -2.0, 5.0, -1.0],
            vec![-1.0, 0.0, -0.3, 3.0],
        ];
        let a = CsrMatrix::from_dense(&d);
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let b = a.apply(&x_true);
        let x = direct_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(direct_solve(&a, &[1.0, 1.0]), Err(Error::SingularMatrix { row: 1, .. })));
    }

    #[test]
    fn size_limit() {
        let a = CsrMatrix::identity(DIRECT_LIMIT + 1);
        assert!(matches!(direct_solve(&a, &vec![0.0; DIRECT_LIMIT + 1]), Err(Error::SizeLimit { .. })));
    }
}
