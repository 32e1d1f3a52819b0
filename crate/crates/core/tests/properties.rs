use std::f64::consts::PI;

use mplab_core::green::{admissibility_check, green_apply, green_representation_residual, Verdict};
use mplab_core::grid::laplacian_apply;
use mplab_core::mollify::{build_kernel, check_green_domination, mollify_measure, Profile};
use mplab_core::reduction::{
    extracted_below_data, reduce_by_truncation, ReductionOptions, ReductionResult,
};
use mplab_core::semilinear::{solve, verify_subsolution, verify_supersolution, SolveOptions};
use mplab_core::{Atom, Error, Grid, GridFunction, Measure, Nonlinearity, Point};
use proptest::prelude::*;

const N: usize = 15;

fn g() -> Grid {
    Grid::unit_square(N).unwrap()
}

fn field(lo: f64, hi: f64) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(lo..hi, N * N).prop_map(|v| GridFunction::from_values(g(), v).unwrap())
}

fn atoms(lo: f64, hi: f64) -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec((0.05f64..0.95, 0.05f64..0.95, lo..hi), 0..3).prop_map(|v| {
        let mut out: Vec<Atom> = Vec::new();
        for (x, y, m) in v {
            if out.iter().all(|a| a.point != Point::new(x, y)) {
                out.push(Atom::new(x, y, m));
            }
        }
        out
    })
}

fn measure(lo: f64, hi: f64) -> impl Strategy<Value = Measure> {
    (field(lo, hi), atoms(lo, hi)).prop_map(|(d, a)| Measure::new(d, a).unwrap())
}

fn nonlinearity() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        (0.0f64..4.0).prop_map(|c| Nonlinearity::Linear { coef: c }),
        (1.0f64..4.0).prop_map(|p| Nonlinearity::Power { p }),
        (1.0f64..3.0).prop_map(|p| Nonlinearity::OddPower { p }),
        (0.2f64..2.0).prop_map(|a| Nonlinearity::Exp { a }),
        (0.2f64..1.0).prop_map(|a| Nonlinearity::ExpFull { a }),
    ]
}

fn ladder(r: Result<ReductionResult, Error>) -> ReductionResult {
    match r {
        Ok(r) => r,
        Err(Error::NonConvergedSequence(r)) => *r,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_is_positive_definite(u in field(-1.0, 1.0)) {
        let au = laplacian_apply(&g(), &u).unwrap();
        let h = g().h();
        let e: f64 = h * h * u.values().iter().zip(au.values()).map(|(a, b)| a * b).sum::<f64>();
        prop_assume!(u.linf_norm() > 0.0);
        prop_assert!(e > 0.0);
    }

    #[test]
    fn laplacian_is_linear(u in field(-1.0, 1.0), v in field(-1.0, 1.0), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let lhs = laplacian_apply(&g(), &u.scale(a).add(&v.scale(b)).unwrap()).unwrap();
        let rhs = laplacian_apply(&g(), &u).unwrap().scale(a).add(&laplacian_apply(&g(), &v).unwrap().scale(b)).unwrap();
        let scale = 1.0 / (g().h() * g().h());
        prop_assert!(lhs.sub(&rhs).unwrap().linf_norm() < 1e-12 * scale * 16.0);
    }

    #[test]
    fn green_is_positive_and_linear(a in measure(0.0, 3.0), b in measure(-2.0, 2.0), s in -2.0f64..2.0) {
        let ga = green_apply(&a, &g()).unwrap();
        prop_assert!(ga.values().iter().all(|&v| v >= -1e-13));
        let gb = green_apply(&b, &g()).unwrap();
        let gs = green_apply(&a.add(&b.scale(s)).unwrap(), &g()).unwrap();
        let lin = ga.add(&gb.scale(s)).unwrap();
        prop_assert!(gs.sub(&lin).unwrap().linf_norm() < 1e-9 * (1.0 + gs.linf_norm()));
    }

    #[test]
    fn jordan_parts_split_total_variation(m in measure(-3.0, 3.0)) {
        let (p, q) = m.jordan_decompose();
        prop_assert!(p.is_nonnegative() && q.is_nonnegative());
        // an atom sitting on a node where the density has the other sign shares a cell
        let shared = m.atom_nodes().iter().zip(m.atoms()).any(|(&k, a)| a.mass * m.density().values()[k] < 0.0);
        prop_assert_eq!(p.mutually_singular(&q).unwrap(), !shared);
        prop_assert!((m.total_variation() - p.total_variation() - q.total_variation()).abs() < 1e-12);
        prop_assert!(p.sub(&q).unwrap().tv_distance(&m).unwrap() < 1e-12);
    }

    #[test]
    fn diffuse_concentrated_recombine(m in measure(-3.0, 3.0)) {
        let (d, c) = m.split_diffuse_concentrated();
        prop_assert_eq!(d.add(&c).unwrap(), m);
    }

    #[test]
    fn total_variation_triangle(a in measure(-3.0, 3.0), b in measure(-3.0, 3.0)) {
        let s = a.add(&b).unwrap();
        prop_assert!(s.total_variation() <= a.total_variation() + b.total_variation() + 1e-12);
    }

    #[test]
    fn singular_same_sign_tv_is_additive(m in measure(0.0, 3.0)) {
        let (d, c) = m.split_diffuse_concentrated();
        let total = d.add(&c).unwrap().total_variation();
        prop_assert!((total - d.total_variation() - c.total_variation()).abs() < 1e-12);
    }

    #[test]
    fn discretization_is_linear(a in measure(-3.0, 3.0), b in measure(-3.0, 3.0), s in -2.0f64..2.0) {
        let lhs = a.add(&b.scale(s)).unwrap().discretize();
        let rhs = a.discretize().add(&b.discretize().scale(s)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().linf_norm() < 1e-9);
    }

    #[test]
    fn mollification_contract(a in measure(0.0, 3.0), b in measure(0.0, 3.0), idx in 2.0f64..7.0, s in -2.0f64..2.0) {
        let k = build_kernel(idx, &g()).unwrap();
        prop_assert!((k.mass() - 1.0).abs() < 1e-12);
        let ra = mollify_measure(&a, &k, &g()).unwrap();
        prop_assert!(ra.is_nonnegative());
        let rab = mollify_measure(&a.add(&b).unwrap(), &k, &g()).unwrap();
        prop_assert!(ra.le(&rab, 1e-12).unwrap());
        let rb = mollify_measure(&b, &k, &g()).unwrap();
        let rc = mollify_measure(&a.add(&b.scale(s)).unwrap(), &k, &g()).unwrap();
        let lin = ra.add(&rb.scale(s)).unwrap();
        prop_assert!(rc.tv_distance(&lin).unwrap() < 1e-12 * (1.0 + rc.total_variation()));
        prop_assert!(ra.total_variation() <= a.total_variation() + 1e-12);
    }

    #[test]
    fn reflection_is_an_involution(f in nonlinearity(), y in -5.0f64..5.0) {
        let x = Point::new(0.3, 0.7);
        let ff = f.reflect().reflect();
        prop_assert_eq!(ff.eval(x, y), f.eval(x, y));
    }

    #[test]
    fn families_are_monotone(f in nonlinearity(), y1 in -20.0f64..20.0, y2 in -20.0f64..20.0) {
        let x = Point::new(0.5, 0.5);
        let (lo, hi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
        prop_assert!(f.eval(x, lo) >= f.eval(x, hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solve_is_unique_and_satisfies_green_representation(f in nonlinearity(), m in measure(-2.0, 4.0)) {
        let o = SolveOptions::default();
        let a = solve(&f, &m, &g(), &o).unwrap();
        let b = solve(&f, &m, &g(), &o).unwrap();
        prop_assert!(a.u.sub(&b.u).unwrap().linf_norm() <= 1e-10);
        let res = green_representation_residual(&a.u, &f, &m).unwrap();
        prop_assert!(res <= 10.0 * a.tol_abs, "{res} vs {}", a.tol_abs);
        prop_assert!(verify_subsolution(&a.u, &f, &m, a.tol_abs).unwrap());
        prop_assert!(verify_supersolution(&a.u, &f, &m, a.tol_abs).unwrap());
    }

    #[test]
    fn lifting_a_solution_gives_a_supersolution(f in nonlinearity(), m in measure(-2.0, 4.0), eps in 1e-3f64..1.0) {
        let rep = solve(&f, &m, &g(), &SolveOptions::default()).unwrap();
        let lift = green_apply(&Measure::from_density(GridFunction::constant(g(), 1.0)), &g()).unwrap();
        let w = rep.u.add(&lift.scale(eps)).unwrap();
        prop_assert!(verify_supersolution(&w, &f, &m, rep.tol_abs).unwrap());
    }

    #[test]
    fn comparison_holds(f in nonlinearity(), m1 in measure(-2.0, 3.0), extra in measure(0.0, 3.0), c in 0.0f64..2.0) {
        let m2 = m1.add(&extra).unwrap();
        let o = SolveOptions { rel_tol: 1e-12, ..SolveOptions::default() };
        let r = mplab_core::semilinear::check_comparison(&f, &m1, &f.shifted(c), &m2, &o).unwrap();
        prop_assert!(r.holds, "violation {}", r.max_violation);
    }

    #[test]
    fn truncated_solutions_decrease(m in measure(0.0, 40.0), a in 0.5f64..2.0) {
        let f = Nonlinearity::Exp { a };
        let mut prev: Option<GridFunction> = None;
        for level in [1.0, 4.0, 16.0, 64.0] {
            let u = solve(&f.truncate(level), &m, &g(), &SolveOptions::default()).unwrap().u;
            if let Some(p) = &prev {
                prop_assert!(u.values().iter().zip(p.values()).all(|(x, y)| *x <= y + 1e-9));
            }
            prev = Some(u);
        }
    }

    #[test]
    fn parts_sandwich_the_solution(m in measure(-3.0, 3.0)) {
        // f(0) ≠ 0 so both parts are active somewhere
        let f = Nonlinearity::ExpFull { a: 1.0 }.shifted(0.5);
        let o = SolveOptions::default();
        let u = solve(&f, &m, &g(), &o).unwrap().u;
        let v = solve(&f.negative_part(), &m, &g(), &o).unwrap().u;
        let w = solve(&f.positive_part(), &m, &g(), &o).unwrap().u;
        prop_assert!(v.values().iter().zip(u.values()).all(|(a, b)| *a <= b + 1e-9));
        prop_assert!(u.values().iter().zip(w.values()).all(|(a, b)| *a <= b + 1e-9));
    }

    #[test]
    fn reduction_stays_below_the_data(m in measure(0.0, 2.0), mass in 1.0f64..20.0) {
        let gr = Grid::unit_square(31).unwrap();
        let dens = GridFunction::from_fn(gr, |p| m.density().values()[((p.x * 14.0) as usize).min(14)]).unwrap();
        let mu = Measure::new(dens, vec![Atom::new(0.5, 0.5, mass)]).unwrap();
        let r = ladder(reduce_by_truncation(&Nonlinearity::Exp { a: 2.0 }, &mu, &ReductionOptions::default()));
        prop_assert!(extracted_below_data(&r, &mu, 1e-6).unwrap());
        prop_assert!(r.extracted.total_variation() <= mu.total_variation() + 1e-6);
    }
}

#[test]
fn density_outside_the_disks_is_preserved() {
    let gr = Grid::unit_square(31).unwrap();
    let dens = GridFunction::from_fn(gr, |p| 1.0 + p.x).unwrap();
    let mu = Measure::new(dens, vec![Atom::new(0.5, 0.5, 4.0 * PI)]).unwrap();
    let r = ladder(reduce_by_truncation(&Nonlinearity::Exp { a: 2.0 }, &mu, &ReductionOptions::default()));
    let d = r.extracted.density();
    let mut checked = 0;
    for k in 0..gr.len() {
        if d.values()[k] != 0.0 {
            assert!((d.values()[k] - mu.density().values()[k]).abs() < 1e-6);
            checked += 1;
        }
    }
    assert!(checked > gr.len() / 2);
}

#[test]
fn mollified_green_potential_is_dominated() {
    let gr = Grid::unit_square(127).unwrap();
    let m = Measure::dirac(gr, gr.bounds().center(), 1.0).unwrap();
    let d = check_green_domination(&m, 10.0, Profile::Bump).unwrap();
    assert!(d.holds, "c_est {}", d.c_est);
    let smooth = Measure::from_density(
        GridFunction::from_fn(gr, |p| {
            let r2 = (p.x - 0.5).powi(2) + (p.y - 0.5).powi(2);
            if r2 < 0.04 {
                (1.0 - r2 / 0.04).powi(3)
            } else {
                0.0
            }
        })
        .unwrap(),
    );
    let d = check_green_domination(&smooth, 10.0, Profile::Bump).unwrap();
    assert!((d.c_est - 1.0).abs() < 5e-2, "c_est {}", d.c_est);
}

#[test]
fn narrow_convergence_against_a_smooth_test_field() {
    let gr = Grid::unit_square(127).unwrap();
    let m = Measure::dirac(gr, Point::new(0.45, 0.55), 1.0).unwrap();
    let eta = GridFunction::from_fn(gr, |p| (PI * p.x).sin() * (PI * p.y).sin()).unwrap();
    let pair = |mm: &Measure| mm.discretize().zip_with(&eta, |a, b| a * b).unwrap().integral();
    let exact = pair(&m);
    let gaps: Vec<f64> = [4.0, 8.0, 16.0, 32.0, 64.0]
        .iter()
        .map(|&i| {
            let k = build_kernel(i, &gr).unwrap();
            (pair(&mollify_measure(&m, &k, &gr).unwrap()) - exact).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[4] < 1e-3);
}

#[test]
fn admissibility_does_not_improve_with_more_mass() {
    let ladder: Vec<Grid> = [31, 63, 127].iter().map(|&n| Grid::unit_square(n).unwrap()).collect();
    let f = Nonlinearity::Exp { a: 1.0 };
    let mut seen_bad = false;
    for k in [2.0, 3.0, 5.0, 6.0] {
        let v = admissibility_check(&f, &ladder, |g| Measure::dirac(*g, g.bounds().center(), k * PI)).unwrap();
        if seen_bad {
            assert_ne!(v.verdict, Verdict::Admissible);
        }
        seen_bad |= v.verdict == Verdict::NotAdmissible;
        if k < 4.0 {
            assert_eq!(v.verdict, Verdict::Admissible, "m0 = {k}π");
        } else {
            assert_eq!(v.verdict, Verdict::NotAdmissible, "m0 = {k}π");
        }
    }
}

#[test]
fn wide_kernel_masses_leak_only_near_the_boundary() {
    let gr = Grid::unit_square(63).unwrap();
    let m = Measure::dirac(gr, Point::new(0.05, 0.5), 1.0).unwrap();
    let k = build_kernel(5.0, &gr).unwrap();
    let r = mollify_measure(&m, &k, &gr).unwrap();
    assert!(r.total_mass() < 1.0 - 0.1);
}
