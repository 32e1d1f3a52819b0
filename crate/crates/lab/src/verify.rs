//! Built-in invariant suite.
//!
//! Corpus: nonlinearities `linear (coef 1)`, `power p=2`, `power p=3`,
//! `exp a=1`, `exp a=2`; measures
//!
//! | name          | definition                                         |
//! |---------------|----------------------------------------------------|
//! | density       | `2π² sin(πx) sin(πy)`                              |
//! | subcritical   | `π δ(0.5, 0.5)`                                    |
//! | supercritical | `4π δ(0.5, 0.5)`                                   |
//! | signed pair   | `4π δ(0.3, 0.5) - 4π δ(0.7, 0.5)`                  |
//! | mixed         | density `1 + x` plus `4π δ(0.5, 0.5)`              |
//!
//! Every (f, measure) pair gets a solver-contract row; the remaining rows
//! exercise comparison, monotone limits, mollifier properties, the Green
//! operator, admissibility and the reduction identities. Rows run on one
//! `n x n` grid (default 63) except two that only need linear work: the
//! narrow-convergence row uses `2n + 1` so that kernels of radius `1/(2n+2)`
//! still fit, and the admissibility rows use the ladder `{n, 2n+1, 4n+3}`.

use std::f64::consts::PI;

use anyhow::Result;
use mplab_core::green::{admissibility_check, green_apply, Verdict};
use mplab_core::mollify::{
    build_kernel, check_green_domination, check_superharmonic_monotonicity, mollify_measure, Profile,
};
use mplab_core::reduction::{
    check_reduction_identities, perturbation_invariance, project, project_variant, reduce_by_mollification,
    reduce_by_truncation, relative_l1_gap, ReductionOptions,
};
use mplab_core::semilinear::{check_comparison, solve, SolveOptions};
use mplab_core::{Atom, Grid, GridFunction, Measure, Nonlinearity, Point};
use rayon::prelude::*;

use crate::report::{InvariantRow, Provenance, StudyReport};
use crate::run::accept_partial_ladder;

pub const MEASURES: [&str; 5] = ["density", "subcritical", "supercritical", "signed pair", "mixed"];

pub fn corpus_f() -> Vec<(&'static str, Nonlinearity)> {
    vec![
        ("linear", Nonlinearity::Linear { coef: 1.0 }),
        ("power p=2", Nonlinearity::Power { p: 2.0 }),
        ("power p=3", Nonlinearity::Power { p: 3.0 }),
        ("exp a=1", Nonlinearity::Exp { a: 1.0 }),
        ("exp a=2", Nonlinearity::Exp { a: 2.0 }),
    ]
}

fn sinsin(g: Grid) -> GridFunction {
    GridFunction::from_fn(g, |p| (PI * p.x).sin() * (PI * p.y).sin()).expect("finite")
}

pub fn corpus_measure(name: &str, g: Grid) -> mplab_core::Result<Measure> {
    let c = Point::new(0.5, 0.5);
    match name {
        "density" => Ok(Measure::from_density(sinsin(g).scale(2.0 * PI * PI))),
        "subcritical" => Measure::dirac(g, c, PI),
        "supercritical" => Measure::dirac(g, c, 4.0 * PI),
        "signed pair" => Measure::atoms_only(
            g,
            vec![Atom::new(0.3, 0.5, 4.0 * PI), Atom::new(0.7, 0.5, -4.0 * PI)],
        ),
        "mixed" => Measure::new(GridFunction::from_fn(g, |p| 1.0 + p.x)?, vec![Atom::new(0.5, 0.5, 4.0 * PI)]),
        _ => unreachable!("unknown corpus measure {name}"),
    }
}

type Check = Box<dyn Fn(Grid) -> Result<InvariantRow> + Send + Sync>;

fn refine(n: usize) -> usize {
    2 * n + 1
}

fn ladder_above(n: usize) -> Vec<usize> {
    vec![n, refine(n), refine(refine(n))]
}

fn checks() -> Vec<(String, Check)> {
    let mut out: Vec<(String, Check)> = Vec::new();
    for (fname, f) in corpus_f() {
        for mname in MEASURES {
            let f = f.clone();
            out.push((
                format!("solver contract [{fname}, {mname}]"),
                Box::new(move |g| {
                    let m = corpus_measure(mname, g)?;
                    let o = SolveOptions::default();
                    let a = solve(&f, &m, &g, &o)?;
                    let b = solve(&f, &m, &g, &o)?;
                    let diff = a.u.sub(&b.u)?.linf_norm();
                    let res = mplab_core::green::green_representation_residual(&a.u, &f, &m)?;
                    let ratio = res / (10.0 * a.tol_abs);
                    Ok(InvariantRow {
                        name: String::new(),
                        passed: a.converged && diff <= 1e-10 && ratio <= 1.0,
                        value: ratio,
                        limit: 1.0,
                        detail: format!(
                            "{} Newton steps, repeat diff {diff:.1e}, Green residual {res:.2e} vs 10 tol_abs",
                            a.newton_iters
                        ),
                    })
                }),
            ));
        }
    }

    let comparisons: [(&str, Nonlinearity, &str, Measure2); 3] = [
        ("exp a=1", Nonlinearity::Exp { a: 1.0 }, "atom vs atom + δ", |g| {
            let m1 = Measure::dirac(g, Point::new(0.5, 0.5), PI)?;
            let m2 = m1.add(&Measure::dirac(g, Point::new(0.3, 0.3), 1.0)?)?;
            Ok((m1, m2))
        }),
        ("power p=3", Nonlinearity::Power { p: 3.0 }, "density vs density + atom", |g| {
            let m1 = corpus_measure("density", g)?;
            let m2 = m1.add(&Measure::dirac(g, Point::new(0.5, 0.5), 2.0)?)?;
            Ok((m1, m2))
        }),
        ("linear", Nonlinearity::Linear { coef: 1.0 }, "signed pair vs signed pair + density", |g| {
            let m1 = corpus_measure("signed pair", g)?;
            let m2 = m1.add(&corpus_measure("density", g)?)?;
            Ok((m1, m2))
        }),
    ];
    for (fname, f, what, build) in comparisons {
        out.push((
            format!("comparison [{fname}, {what}]"),
            Box::new(move |g| {
                let (m1, m2) = build(g)?;
                let o = SolveOptions {
                    rel_tol: 1e-12,
                    ..SolveOptions::default()
                };
                let r = check_comparison(&f, &m1, &f, &m2, &o)?;
                Ok(InvariantRow::at_most("", r.max_violation, 1e-10, "max of u1 - u2"))
            }),
        ));
    }

    out.push((
        "truncation monotonicity [exp a=2, supercritical]".into(),
        Box::new(|g| {
            let f = Nonlinearity::Exp { a: 2.0 };
            let m = corpus_measure("supercritical", g)?;
            let mut worst = f64::NEG_INFINITY;
            let mut prev: Option<GridFunction> = None;
            for level in [1.0, 4.0, 16.0, 64.0, 256.0] {
                let u = solve(&f.truncate(level), &m, &g, &SolveOptions::default())?.u;
                if let Some(p) = &prev {
                    worst = worst.max(u.values().iter().zip(p.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max));
                }
                prev = Some(u);
            }
            Ok(InvariantRow::at_most("", worst, 1e-9, "max increase between levels"))
        }),
    ));

    out.push((
        "sandwich -f⁻ <= f <= f⁺ [exp_full a=1 + 0.5, signed pair]".into(),
        Box::new(|g| {
            let f = Nonlinearity::ExpFull { a: 1.0 }.shifted(0.5);
            let m = corpus_measure("signed pair", g)?;
            let o = SolveOptions::default();
            let u = solve(&f, &m, &g, &o)?.u;
            let v = solve(&f.negative_part(), &m, &g, &o)?.u;
            let w = solve(&f.positive_part(), &m, &g, &o)?.u;
            let low = v.sub(&u)?.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let high = u.sub(&w)?.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(InvariantRow::at_most("", low.max(high), 1e-9, "max bracket violation"))
        }),
    ));

    out.push((
        "mollifier unit mass, positivity, order, linearity [mixed]".into(),
        Box::new(|g| {
            let a = corpus_measure("mixed", g)?;
            let b = corpus_measure("density", g)?;
            let mut worst: f64 = 0.0;
            let mut idx = 4.0;
            while 1.0 / idx >= 2.0 * g.h() {
                let k = build_kernel(idx, &g)?;
                worst = worst.max((k.mass() - 1.0).abs());
                let ra = mollify_measure(&a, &k, &g)?;
                let rab = mollify_measure(&a.add(&b)?, &k, &g)?;
                let rb = mollify_measure(&b, &k, &g)?;
                let neg = ra.density().values().iter().copied().fold(0.0, f64::min);
                worst = worst.max(-neg);
                let order = ra.density().sub(rab.density())?.values().iter().copied().fold(0.0, f64::max);
                worst = worst.max(order);
                let lin = rab.tv_distance(&ra.add(&rb)?)?;
                worst = worst.max(lin / (1.0 + rab.total_variation()));
                worst = worst.max(ra.total_variation() - a.total_variation());
                idx *= 2.0;
            }
            Ok(InvariantRow::at_most("", worst, 1e-12, "worst defect over the index ladder"))
        }),
    ));

    out.push((
        "narrow convergence of R_n δ against sin(πx) sin(πy)".into(),
        Box::new(|g| {
            let g = Grid::new(g.bounds(), refine(g.n()))?;
            let m = Measure::dirac(g, Point::new(0.45, 0.55), 1.0)?;
            let eta = sinsin(g);
            let pair = |mm: &Measure| -> mplab_core::Result<f64> {
                Ok(mm.discretize().zip_with(&eta, |a, b| a * b)?.integral())
            };
            let exact = pair(&m)?;
            let mut gaps = Vec::new();
            let mut idx = 4.0;
            while 1.0 / idx >= 2.0 * g.h() {
                let k = build_kernel(idx, &g)?;
                gaps.push((idx, (pair(&mollify_measure(&m, &k, &g)?)? - exact).abs()));
                idx *= 2.0;
            }
            let (last_idx, last) = *gaps.last().expect("n >= 15 gives an index");
            let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
            Ok(InvariantRow {
                name: String::new(),
                passed: decreasing && last < 1e-3,
                value: last,
                limit: 1e-3,
                detail: format!("pairing gap at index {last_idx}, decreasing {decreasing}"),
            })
        }),
    ));

    out.push((
        "superharmonic mollification chain [Green potential of δ]".into(),
        Box::new(|g| {
            let (ci, cj) = g.center_node();
            let m = Measure::dirac(g, g.node(ci, cj), 1.0)?;
            let u = green_apply(&m, &g)?;
            let node = (ci + 1, cj);
            let slack = g.h() * g.h() * u.linf_norm();
            let mut worst = f64::NEG_INFINITY;
            let mut idx = 3.0;
            let ux = u.get(node.0, node.1);
            while 1.0 / (idx + 1.0) >= 2.0 * g.h() && 1.0 / idx <= g.node_dist_to_boundary(node.0, node.1) {
                let (a, b) = check_superharmonic_monotonicity(&u, node, idx, Profile::Bump)?;
                worst = worst.max(a - b).max(b - ux);
                idx += 1.0;
            }
            Ok(InvariantRow::at_most("", worst, slack, "max of v_n - v_n+1 and v_n+1 - u(x); limit h²‖u‖∞"))
        }),
    ));

    out.push((
        "Green domination [δ, index 10]".into(),
        Box::new(|g| {
            let m = Measure::dirac(g, Point::new(0.5, 0.5), 1.0)?;
            let d = check_green_domination(&m, 10.0, Profile::Bump)?;
            Ok(InvariantRow::at_most("", d.c_est, 1.05, "c_est"))
        }),
    ));

    out.push((
        "Green operator on the first eigenfunction".into(),
        Box::new(|g| {
            let phi = sinsin(g);
            let u = green_apply(&Measure::from_density(phi.scale(2.0 * PI * PI)), &g)?;
            Ok(InvariantRow::at_most("", u.sub(&phi)?.linf_norm(), 1e-3, "L∞ error"))
        }),
    ));

    out.push((
        "Jordan and diffuse/concentrated splits [signed pair + mixed]".into(),
        Box::new(|g| {
            let m = corpus_measure("signed pair", g)?.add(&corpus_measure("mixed", g)?.scale(0.5))?;
            let (p, q) = m.jordan_decompose();
            let tv = (m.total_variation() - p.total_variation() - q.total_variation()).abs();
            let (d, c) = m.split_diffuse_concentrated();
            let recombine = d.add(&c)?.tv_distance(&m)?;
            // the parts share a cell exactly when an atom sits on density of the other sign
            let shared = m
                .atom_nodes()
                .iter()
                .zip(m.atoms())
                .any(|(&k, a)| a.mass * m.density().values()[k] < 0.0);
            let sing = p.mutually_singular(&q)?;
            Ok(InvariantRow {
                name: String::new(),
                passed: tv < 1e-12 && recombine == 0.0 && sing == !shared,
                value: tv.max(recombine),
                limit: 1e-12,
                detail: format!("mutually singular {sing}, shared cell {shared}"),
            })
        }),
    ));

    out.push((
        "admissibility [power p=3, δ] is admissible".into(),
        Box::new(|g| {
            let ladder = ladder_grids(g)?;
            let f = Nonlinearity::Power { p: 3.0 };
            let v = admissibility_check(&f, &ladder, |gg: &Grid| Measure::dirac(*gg, Point::new(0.5, 0.5), 1.0))?;
            Ok(InvariantRow::flag(
                "",
                v.verdict == Verdict::Admissible,
                format!("{} (exponent {:.3})", v.verdict.name(), v.growth_exponent),
            ))
        }),
    ));
    out.push((
        "admissibility [exp a=1, 6πδ] is not admissible".into(),
        Box::new(|g| {
            let ladder = ladder_grids(g)?;
            let f = Nonlinearity::Exp { a: 1.0 };
            let v = admissibility_check(&f, &ladder, |gg: &Grid| Measure::dirac(*gg, Point::new(0.5, 0.5), 6.0 * PI))?;
            Ok(InvariantRow::flag(
                "",
                v.verdict == Verdict::NotAdmissible,
                format!("{} (exponent {:.3})", v.verdict.name(), v.growth_exponent),
            ))
        }),
    ));

    out.push((
        "two-scheme agreement [power p=3, δ]".into(),
        Box::new(|g| {
            let f = Nonlinearity::Power { p: 3.0 };
            let m = Measure::dirac(g, Point::new(0.5, 0.5), 1.0)?;
            let o = ReductionOptions::default();
            let a = accept_partial_ladder(reduce_by_truncation(&f, &m, &o))?;
            let b = accept_partial_ladder(reduce_by_mollification(&f, &m, &o))?;
            Ok(InvariantRow::at_most("", relative_l1_gap(&b, &a)?, 0.02, "relative L1 gap"))
        }),
    ));

    for (what, pick) in [
        ("(μ*)_d = μ_d", 0usize),
        ("(μ_c)* = (μ*)_c and (μ⁺)* = (μ*)⁺", 1),
        ("|μ*| <= |μ|", 2),
    ] {
        out.push((
            format!("reduction identity {what} [exp a=2, mixed]"),
            Box::new(move |g| {
                let m = corpus_measure("mixed", g)?;
                let r = check_reduction_identities(&Nonlinearity::Exp { a: 2.0 }, &m, &ReductionOptions::default())?;
                let tol = 3.0 * r.tol_seq_tv + r.lumped_mass;
                Ok(match pick {
                    0 => InvariantRow::at_most("", r.diffuse / r.diffuse_mass, 0.05, "relative TV of the density parts"),
                    1 => InvariantRow::at_most(
                        "",
                        r.concentrated.max(r.positive_part),
                        tol,
                        format!("TV discrepancy, limit 3 tol_seq + lumped density {:.2e}", r.lumped_mass),
                    ),
                    _ => InvariantRow::at_most("", r.tv_excess, tol, "excess of total variation"),
                })
            }),
        ));
    }

    out.push((
        "project vs variant [exp a=2, signed pair]".into(),
        Box::new(|g| {
            let f = Nonlinearity::Exp { a: 2.0 };
            let m = corpus_measure("signed pair", g)?;
            let o = ReductionOptions::default();
            let a = project(&f, &m, &o)?;
            let b = project_variant(&f, &m, &o)?;
            let tol = o.tol_seq_rel * m.total_variation();
            Ok(InvariantRow::at_most("", a.tv_distance(&b)?, 2.0 * tol, "TV distance, limit 2 tol_seq"))
        }),
    ));

    out.push((
        "additivity on Jordan parts [exp a=2, signed pair]".into(),
        Box::new(|g| {
            let f = Nonlinearity::Exp { a: 2.0 };
            let m = corpus_measure("signed pair", g)?;
            let o = ReductionOptions::default();
            let (p, q) = m.jordan_decompose();
            let whole = project(&f, &m, &o)?;
            let sum = project(&f, &p, &o)?.add(&project(&f, &q.scale(-1.0), &o)?)?;
            let tol = o.tol_seq_rel * m.total_variation();
            Ok(InvariantRow::at_most("", whole.tv_distance(&sum)?, 3.0 * tol, "TV distance, limit 3 tol_seq"))
        }),
    ));

    out.push((
        "additivity on separated same-sign parts [exp a=2, 4πδ + density]".into(),
        Box::new(|g| {
            let f = Nonlinearity::Exp { a: 2.0 };
            let a = Measure::dirac(g, Point::new(0.3, 0.5), 4.0 * PI)?;
            let b = Measure::from_density(GridFunction::from_fn(g, |p| if p.x > 0.6 { 5.0 } else { 0.0 })?);
            let o = ReductionOptions::default();
            let whole = project(&f, &a.add(&b)?, &o)?;
            let sum = project(&f, &a, &o)?.add(&project(&f, &b, &o)?)?;
            let tol = o.tol_seq_rel * a.add(&b)?.total_variation();
            Ok(InvariantRow::at_most("", whole.tv_distance(&sum)?, 3.0 * tol, "TV distance, limit 3 tol_seq"))
        }),
    ));

    out.push((
        "invariance under a bounded perturbation of f [exp a=2, supercritical]".into(),
        Box::new(|g| {
            let f1 = Nonlinearity::Exp { a: 2.0 };
            let f2 = f1.plus(&Nonlinearity::Exp { a: 1.0 }.truncate(1.0));
            let m = corpus_measure("supercritical", g)?;
            let o = ReductionOptions::default();
            let d = perturbation_invariance(&f1, &f2, &m, &o)?;
            let tol = o.tol_seq_rel * m.total_variation();
            Ok(InvariantRow::at_most("", d, 3.0 * tol, "TV distance, limit 3 tol_seq"))
        }),
    ));
    out
}

type Measure2 = fn(Grid) -> mplab_core::Result<(Measure, Measure)>;

fn ladder_grids(g: Grid) -> mplab_core::Result<Vec<Grid>> {
    ladder_above(g.n()).into_iter().map(|n| Grid::new(g.bounds(), n)).collect()
}

pub fn run_verify(n: usize, config_hash: String) -> Result<StudyReport> {
    let g = Grid::unit_square(n)?;
    let rows: Vec<InvariantRow> = checks()
        .into_par_iter()
        .map(|(name, check)| {
            let mut row = match check(g) {
                Ok(r) => r,
                Err(e) => InvariantRow::flag("", false, format!("error: {e:#}")),
            };
            row.name = name;
            row
        })
        .collect();
    let mut report = StudyReport::new("verify", Provenance::new(config_hash), String::new());
    report.invariants = rows;
    report.finalize();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_is_odd_and_doubling() {
        assert_eq!(ladder_above(31), vec![31, 63, 127]);
        assert_eq!(ladder_above(63), vec![63, 127, 255]);
    }

    #[test]
    fn corpus_measures_build() {
        let g = Grid::unit_square(31).unwrap();
        for name in MEASURES {
            corpus_measure(name, g).unwrap();
        }
        assert!(!corpus_measure("signed pair", g).unwrap().is_nonnegative());
    }
}
