use proptest::prelude::*;

use monofd::grid::{GridFunction, KnotClass, MultiIndex};
use monofd::operator::{structure_check, ViolationKind};
use monofd::problems::{example6_field, example6_inner, problem, ProblemParams};
use monofd::rhs::{discretize_measure, example6_rhs, MeasureSpec};
use monofd::study::{problem_operator, RunOptions};

// 5-point Gauss-Legendre on [-1, 1], written out so the oracle shares no code with the library.
const GX: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GW: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn integrate_1d(a: f64, b: f64, cells: usize, f: impl Fn(f64) -> f64) -> f64 {
    let w = (b - a) / cells as f64;
    let mut s = 0.0;
    for c in 0..cells {
        let lo = a + c as f64 * w;
        for (x, wt) in GX.iter().zip(GW) {
            s += 0.5 * w * wt * f(lo + 0.5 * w * (x + 1.0));
        }
    }
    s
}

fn integrate_2d(lo: [f64; 2], hi: [f64; 2], cells: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    integrate_1d(lo[0], hi[0], cells, |x| integrate_1d(lo[1], hi[1], cells, |y| f(x, y)))
}

/// Bubble times a random cubic, vanishing with its gradient on the unit-square boundary.
#[derive(Debug, Clone)]
struct TestFn {
    c: [f64; 6],
}

impl TestFn {
    fn poly(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let c = self.c;
        let p = c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x * x * x + c[5] * y * y;
        let px = c[1] + c[3] * y + 3.0 * c[4] * x * x;
        let py = c[2] + c[3] * x + 2.0 * c[5] * y;
        (p, px, py)
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let b = x * x * (1.0 - x).powi(2) * y * y * (1.0 - y).powi(2);
        b * self.poly(x, y).0
    }

    fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let bx = x * x * (1.0 - x).powi(2);
        let by = y * y * (1.0 - y).powi(2);
        let dbx = 2.0 * x * (1.0 - x).powi(2) - 2.0 * x * x * (1.0 - x);
        let dby = 2.0 * y * (1.0 - y).powi(2) - 2.0 * y * y * (1.0 - y);
        let (p, px, py) = self.poly(x, y);
        (dbx * by * p + bx * by * px, bx * dby * p + bx * by * py)
    }
}

/// `a(v, u*)` for `u* = x1 x2`, integrated separately on the nine pieces cut by the inner square.
fn weak_form(v: &TestFn, sigma_sq: f64, rho: f64) -> f64 {
    let cuts = [0.0, 0.25, 0.75, 1.0];
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let inner = i == 1 && j == 1;
            let a12 = if inner { rho } else { 0.0 };
            s += integrate_2d([cuts[i], cuts[j]], [cuts[i + 1], cuts[j + 1]], 8, |x, y| {
                let (vx, vy) = v.grad(x, y);
                let (ux, uy) = (y, x);
                vx * (sigma_sq * ux + a12 * uy) + vy * (a12 * ux + uy)
            });
        }
    }
    s
}

/// `⟨v | μ⟩` for the library's measure description.
fn pairing(v: &TestFn, mu: &MeasureSpec) -> f64 {
    let mut s = 0.0;
    for d in &mu.densities {
        let (lo, hi) = (&d.region.lo, &d.region.hi);
        s += integrate_2d([lo[0], lo[1]], [hi[0], hi[1]], 8, |x, y| (d.density)(&[x, y]) * v.eval(x, y));
    }
    for l in &mu.lines {
        s += integrate_1d(l.range.0, l.range.1, 8, |t| {
            let mut p = l.base.clone();
            p[l.axis] = t;
            (l.density)(&p) * v.eval(p[0], p[1])
        });
    }
    for p in &mu.points {
        s += p.weight * v.eval(p.location[0], p.location[1]);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn derived_source_matches_weak_form(c in prop::array::uniform6(-2.0f64..2.0)) {
        let v = TestFn { c };
        let mu = example6_rhs(2.0, &example6_inner());
        let lhs = weak_form(&v, 10.0, 2.0);
        let rhs = pairing(&v, &mu);
        prop_assert!((lhs - rhs).abs() <= 1e-6, "a(v,u*) = {lhs}, <v|f> = {rhs}");
    }
}

#[test]
fn edge_line_mass_at_three_quarters() {
    let mu = example6_rhs(2.0, &example6_inner());
    let edge = mu.lines.iter().find(|l| l.axis == 1 && l.base[0] == 0.75).unwrap();
    let mass = integrate_1d(edge.range.0, edge.range.1, 4, |t| (edge.density)(&[0.75, t]));
    assert!((mass.abs() - 0.75 * 2.0 * 0.5).abs() < 1e-14);
    assert_eq!(edge.range, (0.25, 0.75));
}

#[test]
fn zero_rho_has_no_source() {
    assert!(example6_rhs(0.0, &example6_inner()).is_zero());
}

#[test]
fn applied_exact_solution_vanishes_away_from_interface_band() {
    let p = problem("example6").unwrap();
    let n = 40;
    let op = problem_operator(&p, n, &RunOptions::default()).unwrap();
    let g = op.grid().clone();
    let ustar = GridFunction::from_fn(&g, |x| x[0] * x[1]);
    let au = op.apply_vec(&ustar).unwrap();
    let mu = discretize_measure(&p.rhs, &g, op.hat_strides()).unwrap();
    let h = g.h();
    let (mut total_au, mut total_mu) = (0.0, 0.0);
    for row in 0..op.num_rows() {
        let lin = op.knot_lin_of_row(row);
        let x = g.coord(&g.multi(lin));
        total_au += au[row];
        total_mu += mu.get_linear(lin).unwrap();
        let dist = |c: f64| (c - 0.25).abs().min((c - 0.75).abs());
        let inside = |c: f64| c > 0.25 + 4.0 * h && c < 0.75 - 4.0 * h;
        let far = |c: f64| c < 0.25 - 4.0 * h || c > 0.75 + 4.0 * h;
        let away = (dist(x[0]) > 4.0 * h || far(x[1])) && (dist(x[1]) > 4.0 * h || far(x[0]));
        if away {
            let target = if inside(x[0]) && inside(x[1]) { -4.0 } else { 0.0 };
            assert!((au[row] - target).abs() < 1e-8, "knot {x:?}: {}", au[row]);
        }
    }
    assert!((total_au - total_mu).abs() * h * h < 1e-10);
}

#[test]
fn unit_strides_violate_only_where_coupling_points_enter_inner_square() {
    let p = problem("example6").unwrap();
    let n = 20;
    let opts = RunOptions { strides: Some(vec![1, 1]), ..RunOptions::default() };
    let rep = structure_check(&problem_operator(&p, n, &opts).unwrap());
    assert!(!rep.is_compartmental);
    let rows = rep.violating_rows(ViolationKind::PositiveOffDiagonal);
    let h = 1.0 / n as f64;
    for k in &rows {
        let x = [k.0[0] as f64 * h, k.0[1] as f64 * h];
        assert!(x[0] >= 0.25 - 1e-12 && x[0] <= 0.75 - h + 1e-12, "{k:?}");
        assert!(x[1] >= 0.25 - 1e-12 && x[1] <= 0.75 + 1e-12, "{k:?}");
    }
    assert!(rows.contains(&MultiIndex(vec![10, 10])));
}

#[test]
fn strided_operator_is_compartmental_and_irreducible() {
    let p = problem("example6").unwrap();
    let op = problem_operator(&p, 24, &RunOptions::default()).unwrap();
    let rep = structure_check(&op);
    assert!(rep.is_compartmental && rep.is_irreducible, "{:?}", rep.violations.first());
    assert!(op.mask().iter().filter(|m| **m == KnotClass::Interior).count() == 23 * 23);
    let field = example6_field(&ProblemParams::default());
    assert_eq!(field.entry(1, 0, &[0.3, 0.3]), 2.0);
}
