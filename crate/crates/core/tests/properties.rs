use proptest::prelude::*;

use monofd::coeff::{CoefficientField, SymTensor};
use monofd::embed::{embed_eval, HatBasis};
use monofd::grid::{build_grid, BoxDomain, GridFunction};
use monofd::linalg::{norm1, norm_inf};
use monofd::operator::{assemble, structure_check, AssemblyOptions};
use monofd::problems::{problem, ProblemParams};
use monofd::rhs::{discretize_measure, MeasureSpec};
use monofd::solver::{direct_solve, fixed_point_solve_observed, robust_solve, BandedLu, Method, SolverConfig};
use monofd::study::{problem_operator, run_example6_with, RunOptions};

fn laplace(n: usize) -> monofd::operator::SparseOperator {
    let g = build_grid(2, &BoxDomain::unit(2), n).unwrap();
    assemble(&CoefficientField::identity(2), &g, &AssemblyOptions::new("extended", vec![1, 1])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_are_annihilated(a11 in 1.0f64..10.0, a22 in 1.0f64..10.0, t in -0.9f64..0.9, n in 6usize..14) {
        let a12 = t * (a11 * a22).sqrt() / 3.0;
        let field = CoefficientField::constant(SymTensor::from_rows(&[vec![a11, a12], vec![a12, a22]]));
        let g = build_grid(2, &BoxDomain::unit(2), n).unwrap();
        let Ok(op) = assemble(&field, &g, &AssemblyOptions::new("extended", vec![1, 1])) else { return Ok(()) };
        let one = GridFunction::from_fn(&g, |_| 1.0);
        let au = op.apply_vec(&one).unwrap();
        prop_assert!(norm_inf(&au) < 1e-9 * a11.max(a22) * (n * n) as f64);
    }

    #[test]
    fn fixed_point_iterates_stay_nonnegative_and_resolvent_bounded(
        lambda in 0.5f64..20.0,
        n in 8usize..=32,
        seed in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        let n = n - n % 4;
        let p = problem("example6").unwrap();
        let op = problem_operator(&p, n, &RunOptions::default()).unwrap();
        prop_assume!(structure_check(&op).is_compartmental);
        let m = op.num_rows();
        let mu: Vec<f64> = (0..m).map(|i| seed[i % seed.len()]).collect();
        let cfg = SolverConfig { shift: lambda, ..SolverConfig::new(Method::FixedPoint, 1e-11, 200_000) };
        let mut min_seen = 0.0f64;
        let (u, rep) = fixed_point_solve_observed(op.matrix(), &mu, &cfg, None, |_, x| {
            min_seen = min_seen.min(x.iter().copied().fold(f64::INFINITY, f64::min));
        }).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(min_seen >= 0.0);
        prop_assert!(norm1(&u) <= norm1(&mu) / lambda * (1.0 + 1e-9));
    }

    #[test]
    fn embedding_interpolates_bilinear_functions(c in prop::array::uniform4(-3.0f64..3.0), px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let g = build_grid(2, &BoxDomain::unit(2), 7).unwrap();
        let f = |x: &[f64]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1];
        let u = GridFunction::from_fn(&g, f);
        let v = embed_eval(&u, &HatBasis::unit(&g), &[px, py]).unwrap();
        prop_assert!((v - f(&[px, py])).abs() < 1e-12);
    }
}

#[test]
fn robust_matches_direct_on_laplace() {
    let op = laplace(32);
    let m = op.num_rows();
    let rhs: Vec<f64> = (0..m).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let cfg = SolverConfig::new(Method::Robust, 1e-12, 10_000);
    let (x, rep) = robust_solve(op.matrix(), &rhs, &cfg, None).unwrap();
    assert!(rep.relative_residual <= 1e-10);
    let exact = direct_solve(op.matrix(), &rhs).unwrap();
    let diff = x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8, "{diff}");
}

#[test]
fn small_compartmental_inverse_is_nonnegative() {
    let p = problem("example6").unwrap();
    let op = problem_operator(&p, 4, &RunOptions::default()).unwrap();
    assert_eq!(op.num_rows(), 9);
    let lu = BandedLu::factor(op.matrix()).unwrap();
    for j in 0..9 {
        let mut e = vec![0.0; 9];
        e[j] = 1.0;
        assert!(lu.solve(&e).unwrap().iter().all(|v| *v >= -1e-14));
    }
}

#[test]
fn laplace_reproduces_bilinear_boundary_data() {
    let p = problem("identity").unwrap();
    for n in [4, 9] {
        let opts = RunOptions { solver: SolverConfig::new(Method::Direct, 1e-12, 1), ..RunOptions::default() };
        let level = monofd::study::solve_problem(&p, n, &opts).unwrap();
        let g = level.op.grid();
        for l in 0..g.num_knots() {
            let x = g.coord(&g.multi(l));
            assert!((level.solution.get_linear(l).unwrap() - x[0] * x[1]).abs() <= 1e-9);
        }
    }
}

#[test]
fn lumped_smooth_density_is_second_order() {
    let f = |x: &[f64]| (2.0 * x[0]).exp() * (3.0 * x[1]).cos();
    let mu = MeasureSpec::zero().density(BoxDomain::unit(2), f);
    let err = |n: usize| {
        let g = build_grid(2, &BoxDomain::unit(2), n).unwrap();
        let m = discretize_measure(&mu, &g, &[1, 1]).unwrap();
        let x = [0.5, 0.5];
        let k = monofd::grid::MultiIndex(vec![(n / 2) as i64, (n / 2) as i64]);
        (m.get(&k).unwrap() - f(&x)).abs()
    };
    let ratio = err(16) / err(32);
    assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
}

#[test]
fn vanishing_off_diagonal_gives_exact_example() {
    let params = ProblemParams { rho: 0.0, ..ProblemParams::default() };
    let cfg = SolverConfig::new(Method::Robust, 1e-13, 10_000);
    let run = run_example6_with(20, &[3, 1], &cfg, &params).unwrap();
    assert!(run.row.linf <= 1e-9);
}
