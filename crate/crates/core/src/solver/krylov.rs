use std::time::Instant;

use super::{direct_solve, SolveReport, SolverConfig, DIRECT_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, CsrMatrix};

/// Restarts allowed when the recursive residual drifts from the true one.
const MAX_RESTARTS: usize = 8;

struct Outcome {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Jacobi-preconditioned CG for symmetric systems, BiCGSTAB otherwise.
/// Stops on relative 2-norm residual below `cfg.tolerance`; falls back to the
/// banded direct solver on breakdown or non-convergence when the size allows.
pub fn robust_solve(a: &CsrMatrix, rhs: &[f64], cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    let started = Instant::now();
    let m = a.shifted(cfg.shift);
    let symmetric = m.is_symmetric(1e-12);
    let x0 = x0.map(|x| x.to_vec()).unwrap_or_else(|| vec![0.0; m.n()]);
    let attempt = if symmetric { pcg(&m, rhs, x0, cfg) } else { bicgstab(&m, rhs, x0, cfg) };
    let name = if symmetric { "robust/pcg" } else { "robust/bicgstab" };
    let (x, iterations, converged, fallback) = match attempt {
        Ok(o) if o.converged => (o.x, o.iterations, true, None),
        other if m.n() <= DIRECT_LIMIT => {
            let why = match &other {
                Ok(_) => "iteration limit".to_string(),
                Err(e) => e.to_string(),
            };
            let iters = other.map(|o| o.iterations).unwrap_or(0);
            (direct_solve(&m, rhs)?, iters, true, Some(format!("direct ({why})")))
        }
        Ok(o) => (o.x, o.iterations, false, None),
        Err(e) => return Err(e),
    };
    let mut rep = SolveReport::finish(name, a, cfg.shift, rhs, &x, started);
    rep.iterations = iterations;
    rep.converged = converged;
    rep.max_iterations_reached = !converged;
    rep.fallback = fallback;
    Ok((x, rep))
}

fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diag()
        .iter()
        .enumerate()
        .map(|(i, d)| if *d == 0.0 { Err(Error::ZeroDiagonal(i)) } else { Ok(1.0 / d) })
        .collect()
}

fn residual_vec(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.apply(x);
    b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
}

fn pcg(a: &CsrMatrix, b: &[f64], mut x: Vec<f64>, cfg: &SolverConfig) -> Result<Outcome> {
    let dinv = inverse_diagonal(a)?;
    let bn = norm2(b).max(f64::MIN_POSITIVE);
    let mut r = residual_vec(a, b, &x);
    if norm2(&r) / bn <= cfg.tolerance {
        return Ok(Outcome { x, iterations: 0, converged: true });
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; a.n()];
    for it in 1..=cfg.max_iterations {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown(format!("p·Ap = {pap:e} at iteration {it}")));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bn;
        if !rel.is_finite() {
            return Err(Error::NonFinite { iteration: it, row: 0 });
        }
        if rel <= cfg.tolerance {
            return Ok(Outcome { x, iterations: it, converged: true });
        }
        for i in 0..z.len() {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(Outcome { x, iterations: cfg.max_iterations, converged: false })
}

fn bicgstab(a: &CsrMatrix, b: &[f64], mut x: Vec<f64>, cfg: &SolverConfig) -> Result<Outcome> {
    let dinv = inverse_diagonal(a)?;
    let n = a.n();
    let bn = norm2(b).max(f64::MIN_POSITIVE);
    let mut r = residual_vec(a, b, &x);
    if norm2(&r) / bn <= cfg.tolerance {
        return Ok(Outcome { x, iterations: 0, converged: true });
    }
    let mut r_hat = r.clone();
    let mut restarts = 0;
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zv = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=cfg.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::Breakdown(format!("rho = {rho_new:e}, omega = {omega:e} at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * dinv[i];
        }
        a.mul_vec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(Error::Breakdown(format!("r̂·v = 0 at iteration {it}")));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bn <= cfg.tolerance {
            axpy(alpha, &y, &mut x);
            r = residual_vec(a, b, &x);
            if norm2(&r) / bn <= cfg.tolerance {
                return Ok(Outcome { x, iterations: it, converged: true });
            }
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return Ok(Outcome { x, iterations: it, converged: false });
            }
            r_hat.copy_from_slice(&r);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.fill(0.0);
            p.fill(0.0);
            continue;
        }
        for i in 0..n {
            zv[i] = s[i] * dinv[i];
        }
        a.mul_vec(&zv, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Breakdown(format!("t·t = 0 at iteration {it}")));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zv[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm2(&r) / bn;
        if !rel.is_finite() {
            return Err(Error::NonFinite { iteration: it, row: 0 });
        }
        if rel <= cfg.tolerance {
            r = residual_vec(a, b, &x);
            if norm2(&r) / bn <= cfg.tolerance {
                return Ok(Outcome { x, iterations: it, converged: true });
            }
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return Ok(Outcome { x, iterations: it, converged: false });
            }
            r_hat.copy_from_slice(&r);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.fill(0.0);
            p.fill(0.0);
        }
    }
    Ok(Outcome { x, iterations: cfg.max_iterations, converged: false })
}
