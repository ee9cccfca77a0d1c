use std::time::Instant;

use rayon::prelude::*;

use super::{SolveReport, SolverConfig, StopNorm};
use crate::error::{Error, Result};
use crate::linalg::{norm1, CsrMatrix};

/// Jacobi iteration `u ← u + K⁻¹(rhs − (λI + A)u)` with `K = diag(A) + λ`.
pub fn fixed_point_solve(a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    fixed_point_solve_observed(a, rhs, cfg, x0, |_, _| {})
}

/// As [`fixed_point_solve`], calling `observer(iteration, u)` after every sweep.
pub fn fixed_point_solve_observed(
    a: &CsrMatrix,
    rhs: &[f64],
    cfg: &SolverConfig,
    x0: Option<&[f64]>,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let started = Instant::now();
    let n = a.n();
    let k: Vec<f64> = a.diag().iter().map(|d| d + cfg.shift).collect();
    if let Some(row) = k.iter().position(|d| *d == 0.0) {
        return Err(Error::ZeroDiagonal(row));
    }
    let kinv: Vec<f64> = k.iter().map(|d| 1.0 / d).collect();
    let mut u = x0.map(|x| x.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut au = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let scale = match cfg.stopping {
        StopNorm::UnscaledL1 => 1.0,
        StopNorm::CellScaledL1 => cfg.cell_volume,
    };
    let mut iterations = 0;
    let mut diff = f64::INFINITY;
    let mut half_diff = f64::INFINITY;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        a.mul_vec(&u, &mut au);
        delta
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = kinv[i] * (rhs[i] - au[i] - cfg.shift * u[i]));
        u.par_iter_mut().zip(delta.par_iter()).for_each(|(ui, di)| *ui += di);
        iterations += 1;
        diff = scale * norm1(&delta);
        if !diff.is_finite() {
            let row = u.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite { iteration: iterations, row });
        }
        observer(iterations, &u);
        if iterations == cfg.max_iterations / 2 {
            half_diff = diff;
        }
        if diff < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let mut rep = SolveReport::finish("fixed-point", a, cfg.shift, rhs, &u, started);
    rep.iterations = iterations;
    rep.final_difference = Some(diff);
    rep.converged = converged;
    rep.max_iterations_reached = !converged;
    rep.stagnated = !converged && diff >= half_diff;
    Ok((u, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Method;

    fn poisson_1d(n: usize) -> CsrMatrix {
        let h2 = 1.0 / (n * n) as f64;
        let m = n - 1;
        let mut t = Vec::new();
        for i in 0..m {
            t.push((i, i, 2.0 / h2));
            if i > 0 {
                t.push((i, i - 1, -1.0 / h2));
            }
            if i + 1 < m {
                t.push((i, i + 1, -1.0 / h2));
            }
        }
        CsrMatrix::from_triplets(m, t)
    }

    #[test]
    fn poisson_1d_n4() {
        let a = poisson_1d(4);
        let cfg = SolverConfig::new(Method::FixedPoint, 1e-14, 10_000);
        let (u, rep) = fixed_point_solve(&a, &[1.0, 1.0, 1.0], &cfg, None).unwrap();
        for (v, e) in u.iter().zip([0.09375, 0.125, 0.09375]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(rep.converged && rep.final_difference.unwrap() < 1e-14);
    }

    #[test]
    fn zero_diagonal_rejected() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        let cfg = SolverConfig::new(Method::FixedPoint, 1e-8, 10);
        assert!(matches!(fixed_point_solve(&a, &[1.0, 1.0], &cfg, None), Err(Error::ZeroDiagonal(0))));
    }

    #[test]
    fn divergence_reported_as_non_finite() {
        let a = CsrMatrix::from_dense(&[vec![1.0, -5.0], vec![-5.0, 1.0]]);
        let cfg = SolverConfig::new(Method::FixedPoint, 1e-8, 100_000);
        assert!(matches!(fixed_point_solve(&a, &[1.0, 1.0], &cfg, None), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn max_iterations_flagged() {
        let a = poisson_1d(32);
        let cfg = SolverConfig::new(Method::FixedPoint, 1e-14, 5);
        let (_, rep) = fixed_point_solve(&a, &vec![1.0; 31], &cfg, None).unwrap();
        assert!(!rep.converged && rep.max_iterations_reached);
        assert_eq!(rep.iterations, 5);
    }

    #[test]
    fn iterates_stay_nonnegative() {
        let a = poisson_1d(16);
        let cfg = SolverConfig::new(Method::FixedPoint, 1e-10, 2000);
        let rhs: Vec<f64> = (0..15).map(|i| (i % 3) as f64).collect();
        let mut min = f64::INFINITY;
        fixed_point_solve_observed(&a, &rhs, &cfg, None, |_, u| {
            min = min.min(u.iter().cloned().fold(f64::INFINITY, f64::min));
        })
        .unwrap();
        assert!(min >= 0.0);
    }
}
