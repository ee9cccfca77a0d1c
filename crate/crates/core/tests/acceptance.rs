//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported on stdout; set `MONOFD_ACCEPTANCE_STRICT` to turn
//! any FAIL into a nonzero exit.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use monofd::coeff::{CoefficientField, SymTensor};
use monofd::grid::{BoxDomain, MultiIndex};
use monofd::problems::{example6_field, ProblemParams};
use monofd::solver::{Method, SolverConfig};
use monofd::stencil::{select_r_for_field, SchemeRegistry};
use monofd::study::{
    consistency_suite, convergence_study, ellipticity_check, example6_solver, exactness_suite, max_principle_check,
    norm_suites, run_example6, solver_agreement, structure_study, SmoothPair, StudyConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reproduction() -> Outcome {
    let cfg = SolverConfig::new(Method::Robust, 1e-12, 200_000);
    let run = run_example6(400, &[3, 1], &cfg).unwrap();
    let r = &run.row;
    let h = r.h;
    let knots_off = ((r.linf_at[0] - 0.75).abs() / h).max((r.linf_at[1] - 0.75).abs() / h).round();
    let pass = (0.0002..=0.0032).contains(&r.eps_rel) && r.linf <= 0.008 && knots_off <= 5.0 && r.runtime_s <= 120.0;
    outcome(
        pass,
        format!(
            "eps_rel={:.5} (reference 0.0008, band [0.0002,0.0032]) linf={:.5} (reference 0.004, max 0.008) argmax=({:.4},{:.4}) {} knots from (0.75,0.75), {:.1}s",
            r.eps_rel, r.linf, r.linf_at[0], r.linf_at[1], knots_off, r.runtime_s
        ),
    )
}

fn fixed_point_iterations() -> Outcome {
    let cfg = example6_solver(Method::FixedPoint, 1e-9, 5000);
    let run = run_example6(400, &[3, 1], &cfg).unwrap();
    let rep = &run.level.report;
    outcome(
        rep.converged && rep.iterations <= 5000,
        format!(
            "iterations={} converged={} final_difference={:.3e} (reference count 210, not asserted)",
            rep.iterations,
            rep.converged,
            rep.final_difference.unwrap_or(f64::NAN)
        ),
    )
}

fn structure() -> Outcome {
    let levels = [52, 100, 200, 400];
    let good = structure_study(&levels, &[3, 1]).unwrap();
    let clean = good.iter().all(|r| r.is_compartmental && r.violations.is_empty());
    let bad = structure_study(&levels, &[1, 1]).unwrap();
    let mut exact = true;
    let mut counts = Vec::new();
    for (&n, rep) in levels.iter().zip(&bad) {
        let h = 1.0 / n as f64;
        let mut rows: Vec<MultiIndex> = rep.violations.iter().map(|v| v.row.clone()).collect();
        rows.sort();
        rows.dedup();
        let inside = |x: f64| (0.25..0.75).contains(&x);
        let mut expected = Vec::new();
        for i in 1..n as i64 {
            for j in 1..n as i64 {
                let (x1, x2) = (i as f64 * h, j as f64 * h);
                if inside(x1 + 0.5 * h) && (inside(x2 + 0.5 * h) || inside(x2 - 0.5 * h)) {
                    expected.push(MultiIndex(vec![i, j]));
                }
            }
        }
        expected.sort();
        exact &= rows == expected;
        counts.push(format!("N={n}:{}", rows.len()));
    }
    outcome(
        clean && exact,
        format!("r=(3,1) clean={clean}; r=(1,1) violating knots match oracle={exact} [{}]", counts.join(" ")),
    )
}

fn exactness() -> Outcome {
    let started = Instant::now();
    let names = SchemeRegistry::default().names();
    let rep = exactness_suite(&names, 2, 100, 100, 2024).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let worst = rep.rows.iter().map(|r| r.max_relative_residual).fold(0.0, f64::max);
    outcome(
        rep.pass && secs <= 30.0,
        format!("{} schemes x 100 tensors x 100 quadratics, max relative residual {worst:.2e}, {secs:.1}s", names.len()),
    )
}

fn max_principle() -> Outcome {
    let rep = max_principle_check(&[8, 16, 24, 32], &[3, 1]).unwrap();
    outcome(rep.pass, format!("min inverse entry {:.3e} over N in {{8,16,24,32}}", rep.min_entry))
}

fn ellipticity() -> Outcome {
    let field = example6_field(&ProblemParams::default());
    let rep = ellipticity_check(&field, 64, &[3, 1], 500, 42).unwrap();
    outcome(
        rep.pass,
        format!(
            "kappa*={:.4} kappa={:.4} violations={}/{} min ratio {:.4}",
            rep.kappa_star, rep.kappa, rep.violations, rep.cases, rep.min_ratio
        ),
    )
}

fn consistency() -> Outcome {
    let field = CoefficientField::analytic(2, |x| SymTensor::from_rows(&[vec![3.0 + x[0] * x[1], 0.5], vec![0.5, 2.0 + x[0]]]));
    let pair = SmoothPair {
        v: Arc::new(|x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])),
        grad_v: Arc::new(|x| vec![(1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1])]),
        u: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
        grad_u: Arc::new(|x| vec![PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]),
    };
    let grid = monofd::grid::build_grid(2, &BoxDomain::unit(2), 128).unwrap();
    let r = select_r_for_field(&field, &grid, 8).unwrap();
    let rep = consistency_suite(&field, &pair, &BoxDomain::unit(2), &[128, 256, 512], "extended", &r).unwrap();
    let pass = rep.ratios.iter().all(|q| (1.5..=3.0).contains(q));
    let errs: Vec<String> = rep.rows.iter().map(|r| format!("N={}:{:.3e}", r.n, r.error)).collect();
    let ratios: Vec<String> = rep.ratios.iter().map(|q| format!("{q:.3}")).collect();
    outcome(pass, format!("strides {r:?} errors [{}] ratios [{}] (band [1.5,3])", errs.join(" "), ratios.join(" ")))
}

fn norms() -> Outcome {
    let suites = norm_suites(1000, 7).unwrap();
    let pass = suites.iter().all(|s| s.pass());
    let parts: Vec<String> = suites
        .iter()
        .map(|s| {
            let note = s.note.as_ref().map(|n| format!(", {n}")).unwrap_or_default();
            format!("{}: {}/{} violations (max excess {:.2e}{note})", s.name, s.violations, s.cases, s.max_excess)
        })
        .collect();
    outcome(pass, parts.join("; "))
}

fn convergence() -> Outcome {
    let solver = SolverConfig::new(Method::Robust, 1e-12, 200_000);
    let mut ex = StudyConfig { levels: vec![52, 100, 200, 400], ..StudyConfig::default() };
    ex.run.solver = solver.clone();
    let t6 = convergence_study(&ex).unwrap();
    let mut sm = StudyConfig { problem: "manufactured_smooth".into(), levels: vec![16, 32, 64, 128], ..StudyConfig::default() };
    sm.run.solver = solver;
    let ts = convergence_study(&sm).unwrap();
    let order = ts.orders["linf"];
    let pass = t6.monotone && (order - 2.0).abs() <= 0.3;
    let linf: Vec<String> = t6.rows.iter().map(|r| format!("{:.2e}", r.linf)).collect();
    let eps: Vec<String> = t6.rows.iter().map(|r| format!("{:.2e}", r.eps_rel)).collect();
    outcome(
        pass,
        format!(
            "example6 strictly decreasing={} linf [{}] eps_rel [{}]; manufactured_smooth linf order {order:.3}",
            t6.monotone,
            linf.join(" "),
            eps.join(" ")
        ),
    )
}

fn agreement() -> Outcome {
    let reps: Vec<_> = [16, 32].iter().map(|&n| solver_agreement(n, &[3, 1]).unwrap()).collect();
    let pass = reps.iter().all(|r| r.pass);
    let parts: Vec<String> = reps
        .iter()
        .map(|r| {
            format!(
                "N={}: fp-robust {:.1e} fp-direct {:.1e} robust-direct {:.1e} ({} fixed-point iterations)",
                r.n, r.fp_robust, r.fp_direct, r.robust_direct, r.fixed_point_iterations
            )
        })
        .collect();
    outcome(pass, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("reproduction", reproduction),
        ("fixed_point_iterations", fixed_point_iterations),
        ("compartmental_structure", structure),
        ("exactness", exactness),
        ("max_principle", max_principle),
        ("strict_ellipticity", ellipticity),
        ("consistency", consistency),
        ("norm_suites", norms),
        ("convergence", convergence),
        ("solver_agreement", agreement),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        if std::env::var_os("MONOFD_ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
