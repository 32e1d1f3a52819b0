//! The `solve`, `reduce`, `project`, `admissible` and `sweep` pipelines.
//!
//! Grid-ladder members run on the rayon pool; files are written from the
//! worker that owns them and the report is assembled afterwards in ladder
//! order, so output does not depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use mplab_core::green::{admissibility_check, green_representation_residual};
use mplab_core::mollify::{build_kernel_with, default_schedule, mollify_measure, MollifierKernel};
use mplab_core::reduction::{
    extracted_below_data, reduce_by_mollification, reduce_by_truncation, relative_l1_gap, ReductionResult,
};
use mplab_core::semilinear::{check_apriori_bound, solve, AprioriBound, SolveReport};
use mplab_core::{Error, Grid, Measure, Nonlinearity, Scheme};
use rayon::prelude::*;

use crate::config::{ConfigError, Experiment, SchemeSel};
use crate::io::{self, AtomJson};
use crate::plot::{Plot, Series};
use crate::report::{
    AdmissibilitySummary, Extrapolated, GapRow, GridSummary, IntegralRow, InvariantRow, ProjectionSummary, Provenance,
    RawValue, ReductionSummary, SolveSummary, StudyReport, SweepRow,
};

/// Two-scheme gap limit and a priori spread limit.
const GAP_LIMIT: f64 = 0.02;
const SPREAD_LIMIT: f64 = 0.20;

pub fn accept_partial_solve(r: mplab_core::Result<SolveReport>) -> mplab_core::Result<SolveReport> {
    match r {
        Err(Error::NonConverged(rep)) => Ok(*rep),
        other => other,
    }
}

pub fn accept_partial_ladder(r: mplab_core::Result<ReductionResult>) -> mplab_core::Result<ReductionResult> {
    match r {
        Err(Error::NonConvergedSequence(res)) => Ok(*res),
        other => other,
    }
}

fn new_report(command: &'static str, exp: &Experiment) -> StudyReport {
    StudyReport::new(command, Provenance::new(exp.config_hash.clone()), exp.f_label())
}

fn write_plot(out: &Path, name: &str, plot: &Plot) -> Result<()> {
    io::write_atomic(&out.join("plots").join(name), plot.to_svg().as_bytes())
}

/// Atom rows of `extracted` at the atoms of the data `m`.
fn atom_rows(extracted: &Measure, m: &Measure, radii: Option<&[f64]>) -> Vec<AtomJson> {
    m.atoms()
        .iter()
        .enumerate()
        .map(|(k, a)| AtomJson {
            x: a.point.x,
            y: a.point.y,
            mass: extracted
                .atoms()
                .iter()
                .find(|b| b.point == a.point)
                .map_or(0.0, |b| b.mass),
            radius: radii.and_then(|r| r.get(k).copied()),
        })
        .collect()
}

fn spread(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        (hi - lo) / lo
    } else {
        0.0
    }
}

fn raw(grids: &[Grid], values: impl Iterator<Item = f64>) -> Vec<RawValue> {
    grids
        .iter()
        .zip(values)
        .map(|(g, value)| RawValue {
            n: g.n(),
            h: g.h(),
            value,
        })
        .collect()
}

fn write_kernel(out: &Path, name: &str, k: &MollifierKernel) -> Result<()> {
    let side = 2 * k.radius_nodes + 1;
    let mut s = String::new();
    for row in k.weights.chunks(side) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s += &line.join(",");
        s.push('\n');
    }
    io::write_atomic(&out.join(format!("{name}.csv")), s.as_bytes())?;
    io::write_json(
        &out.join(format!("{name}.json")),
        &serde_json::json!({
            "index": k.index,
            "profile": k.profile.name(),
            "radius": k.radius(),
            "radius_nodes": k.radius_nodes,
            "h": k.h,
            "c_continuum": k.c_continuum,
            "c_discrete": k.c_discrete,
        }),
    )
}

pub fn run_solve(exp: &Experiment, out: &Path) -> Result<StudyReport> {
    let f = exp.f()?;
    let md = exp.measure()?;
    let opts = exp.solve_options();
    type Row = (Grid, SolveReport, f64, AprioriBound);
    let rows: Vec<Row> = exp
        .grids
        .par_iter()
        .map(|&g| -> Result<Row> {
            let m = md.on(g)?;
            let rep = accept_partial_solve(solve(f, &m, &g, &opts))?;
            let green = green_representation_residual(&rep.u, f, &m)?;
            let ap = check_apriori_bound(&rep, f, &m, exp.q)?;
            io::write_grid_function(&out.join(format!("solution_{}.csv", g.n())), &rep.u)?;
            Ok((g, rep, green, ap))
        })
        .collect::<Result<_>>()?;

    let mut report = new_report("solve", exp);
    let mut trace = String::from("n,h,newton_iters,fallback_sweeps,final_residual,tol_abs,converged\n");
    for (g, rep, green, ap) in &rows {
        let _ = writeln!(
            trace,
            "{},{},{},{},{},{},{}",
            g.n(),
            g.h(),
            rep.newton_iters,
            rep.fallback_sweeps,
            rep.final_residual,
            rep.tol_abs,
            rep.converged
        );
        report.converged &= rep.converged;
        report.invariants.push(InvariantRow::at_most(
            format!("green representation residual n={}", g.n()),
            *green,
            10.0 * rep.tol_abs,
            "limit 10 tol_abs",
        ));
        let mut gs = GridSummary::new(g.n(), g.h());
        gs.solve = Some(SolveSummary {
            converged: rep.converged,
            newton_iters: rep.newton_iters,
            fallback_sweeps: rep.fallback_sweeps,
            final_residual: rep.final_residual,
            tol_abs: rep.tol_abs,
            l1: rep.norms.l1,
            linf: rep.norms.linf,
            w1q: rep.norms.w1q,
            f_l1: rep.norms.f_l1,
            green_residual: *green,
            apriori_lhs: ap.lhs,
            apriori_rhs: ap.rhs,
            apriori_ratio: ap.ratio(),
        });
        report.grids.push(gs);
    }
    if rows.len() >= 2 {
        let ratios: Vec<f64> = rows.iter().map(|r| r.3.ratio()).collect();
        report.invariants.push(InvariantRow::at_most(
            "a priori ratio spread across grids",
            spread(&ratios),
            SPREAD_LIMIT,
            format!("q = {}", exp.q),
        ));
    }
    let grids: Vec<Grid> = rows.iter().map(|r| r.0).collect();
    if let Some(e) = Extrapolated::fit("u L1 norm", raw(&grids, rows.iter().map(|r| r.1.norms.l1))) {
        report.extrapolations.push(e);
    }
    io::write_atomic(&out.join("trace.csv"), trace.as_bytes())?;
    let pts = |sel: fn(&SolveReport) -> f64| rows.iter().map(|r| (r.0.h(), sel(&r.1))).collect();
    write_plot(
        out,
        "norms.svg",
        &Plot {
            title: format!("solution norms, f = {}", exp.f_label()),
            x_label: "h".into(),
            y_label: "norm".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    label: "L1".into(),
                    points: pts(|r| r.norms.l1),
                },
                Series {
                    label: "Linf".into(),
                    points: pts(|r| r.norms.linf),
                },
                Series {
                    label: format!("W1,{}", exp.q),
                    points: pts(|r| r.norms.w1q),
                },
            ],
            notes: Vec::new(),
        },
    )?;
    report.finalize();
    Ok(report)
}

fn schemes(sel: SchemeSel) -> Vec<Scheme> {
    match sel {
        SchemeSel::Truncation => vec![Scheme::Truncation],
        SchemeSel::Mollification => vec![Scheme::Mollification],
        SchemeSel::Both => vec![Scheme::Truncation, Scheme::Mollification],
    }
}

fn trace_rows(s: &mut String, label: &str, n: usize, r: &ReductionResult) {
    for t in &r.trace {
        let masses: Vec<String> = t.atom_masses.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(
            s,
            "{label},{n},{},{},{},{}",
            t.level,
            t.l1_increment,
            t.newton_iters,
            masses.join(";")
        );
    }
}

const TRACE_HEADER: &str = "scheme,n,level,l1_increment,newton_iters,atom_masses\n";

pub fn run_reduce(exp: &Experiment, out: &Path) -> Result<StudyReport> {
    let f = exp.f()?;
    let md = exp.measure()?;
    let ropts = exp.reduction_options();
    let schemes = schemes(exp.scheme);
    let jobs: Vec<(Grid, Scheme)> = exp
        .grids
        .iter()
        .flat_map(|&g| schemes.iter().map(move |&s| (g, s)))
        .collect();
    let results: Vec<(Grid, Scheme, Measure, ReductionResult)> = jobs
        .par_iter()
        .map(|&(g, s)| -> Result<_> {
            let m = md.on(g)?;
            let r = match s {
                Scheme::Truncation => reduce_by_truncation(f, &m, &ropts),
                Scheme::Mollification => reduce_by_mollification(f, &m, &ropts),
            };
            let r = accept_partial_ladder(r)?;
            let n = g.n();
            io::write_grid_function(&out.join(format!("u_star_{}_{n}.csv", s.name())), &r.u_star)?;
            io::write_measure(out, &format!("extracted_{}_{n}", s.name()), &r.extracted, Some(&r.radii))?;
            if s == Scheme::Mollification {
                let sched = ropts.schedule.clone().unwrap_or_else(|| default_schedule(&m));
                if let Some(&last) = sched.last() {
                    write_kernel(out, &format!("kernel_{n}"), &build_kernel_with(last, ropts.profile, &g)?)?;
                }
            }
            Ok((g, s, m, r))
        })
        .collect::<Result<_>>()?;

    let mut report = new_report("reduce", exp);
    let mut trace = String::from(TRACE_HEADER);
    for &g in &exp.grids {
        let mut gs = GridSummary::new(g.n(), g.h());
        let here: Vec<&(Grid, Scheme, Measure, ReductionResult)> = results.iter().filter(|r| r.0 == g).collect();
        for (k, (_, s, m, r)) in here.iter().enumerate() {
            if k == 0 {
                io::write_grid_function(&out.join(format!("solution_{}.csv", g.n())), &r.u_star)?;
            }
            trace_rows(&mut trace, s.name(), g.n(), r);
            report.converged &= r.converged;
            let data_tv = m.total_variation();
            let tol_tv = ropts.tol_seq_rel * data_tv;
            if m.is_nonnegative() && f.condition_b(&g) {
                report.invariants.push(InvariantRow::flag(
                    format!("extracted <= data [{} n={}]", s.name(), g.n()),
                    extracted_below_data(r, m, tol_tv)?,
                    format!("tol {tol_tv:.3e}"),
                ));
            }
            report.invariants.push(InvariantRow::at_most(
                format!("|mu*| <= |mu| [{} n={}]", s.name(), g.n()),
                r.extracted.total_variation() - data_tv,
                tol_tv,
                "excess of total variation",
            ));
            gs.reductions.push(ReductionSummary {
                scheme: s.name(),
                converged: r.converged,
                levels: r.trace.len(),
                tol_seq: r.tol_seq,
                final_increment: r.trace.last().map_or(f64::NAN, |t| t.l1_increment),
                u_star_l1: r.u_star.l1_norm(),
                atoms: atom_rows(&r.extracted, m, Some(&r.radii)),
                density_mass: r.extracted.density().integral(),
                extracted_tv: r.extracted.total_variation(),
                data_tv,
            });
        }
        if here.len() == 2 {
            report.two_scheme_gaps.push(GapRow {
                n: g.n(),
                relative_l1_gap: relative_l1_gap(&here[1].3, &here[0].3)?,
            });
        }
        report.grids.push(gs);
    }
    if let Some(last) = report.two_scheme_gaps.last() {
        report.invariants.push(InvariantRow::at_most(
            format!("two-scheme L1 gap [n={}]", last.n),
            last.relative_l1_gap,
            GAP_LIMIT,
            "relative to the truncation limit",
        ));
    }
    if report.two_scheme_gaps.len() >= 2 {
        let gaps: Vec<f64> = report.two_scheme_gaps.iter().map(|g| g.relative_l1_gap).collect();
        report.invariants.push(InvariantRow::flag(
            "two-scheme gap shrinks under refinement",
            gaps.windows(2).all(|w| w[1] < w[0]),
            format!("{gaps:.4?}"),
        ));
    }

    let mut mass_series = Vec::new();
    let mut notes = Vec::new();
    let n_atoms = results.first().map_or(0, |r| r.2.atoms().len());
    for &s in &schemes {
        for a in 0..n_atoms {
            let vals: Vec<f64> = exp
                .grids
                .iter()
                .map(|&g| {
                    let (_, _, m, r) = results.iter().find(|r| r.0 == g && r.1 == s).expect("job ran");
                    atom_rows(&r.extracted, m, None)[a].mass
                })
                .collect();
            let label = format!("{} atom {a} mass", s.name());
            mass_series.push(Series {
                label: label.clone(),
                points: exp.grids.iter().map(|g| g.h()).zip(vals.iter().copied()).collect(),
            });
            if let Some(e) = Extrapolated::fit(label, raw(&exp.grids, vals.into_iter())) {
                notes.push(format!("{} {a}: {:.5} ± {:.1e}", s.name(), e.a0, e.error_estimate));
                report.extrapolations.push(e);
            }
        }
    }
    io::write_atomic(&out.join("trace.csv"), trace.as_bytes())?;
    for &g in &exp.grids {
        let series = results
            .iter()
            .filter(|r| r.0 == g)
            .map(|(_, s, _, r)| Series {
                label: s.name().into(),
                points: r
                    .trace
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, t)| (k as f64, t.l1_increment))
                    .collect(),
            })
            .collect();
        write_plot(
            out,
            &format!("trace_{}.svg", g.n()),
            &Plot {
                title: format!("L1 increments, n = {}", g.n()),
                x_label: "ladder step".into(),
                y_label: "L1 increment".into(),
                log_y: true,
                series,
                ..Plot::default()
            },
        )?;
    }
    if n_atoms > 0 {
        write_plot(
            out,
            "atom_mass.svg",
            &Plot {
                title: format!("extracted atom mass, f = {}", exp.f_label()),
                x_label: "h".into(),
                y_label: "mass".into(),
                log_x: true,
                series: mass_series,
                notes,
                ..Plot::default()
            },
        )?;
    }
    report.finalize();
    Ok(report)
}

struct ProjectionRun {
    measure: Measure,
    parts: Vec<(&'static str, ReductionResult)>,
}

/// Both Jordan parts through the truncation ladder, keeping partial results.
fn project_parts(f: &Nonlinearity, m: &Measure, exp: &Experiment, variant: bool) -> Result<ProjectionRun> {
    let ropts = exp.reduction_options();
    let (p, q) = m.jordan_decompose();
    let (fp, fq, lp, lq) = if variant {
        (f.negative_part(), f.positive_part().reflect(), "variant+", "variant-")
    } else {
        (f.clone(), f.reflect(), "project+", "project-")
    };
    let mut measure = Measure::zero(*m.grid());
    let mut parts = Vec::new();
    if !p.is_zero() {
        let r = accept_partial_ladder(reduce_by_truncation(&fp, &p, &ropts))?;
        measure = measure.add(&r.extracted)?;
        parts.push((lp, r));
    }
    if !q.is_zero() {
        let r = accept_partial_ladder(reduce_by_truncation(&fq, &q, &ropts))?;
        measure = measure.sub(&r.extracted)?;
        parts.push((lq, r));
    }
    Ok(ProjectionRun { measure, parts })
}

pub fn run_project(exp: &Experiment, out: &Path) -> Result<StudyReport> {
    let f = exp.f()?;
    let md = exp.measure()?;
    let results: Vec<(Grid, Measure, ProjectionRun, ProjectionRun)> = exp
        .grids
        .par_iter()
        .map(|&g| -> Result<_> {
            let m = md.on(g)?;
            let a = project_parts(f, &m, exp, false)?;
            let b = project_parts(f, &m, exp, true)?;
            let n = g.n();
            io::write_measure(out, &format!("projection_{n}"), &a.measure, None)?;
            for (label, r) in &a.parts {
                let part = if label.ends_with('+') { "pos" } else { "neg" };
                io::write_grid_function(&out.join(format!("u_star_{part}_{n}.csv")), &r.u_star)?;
            }
            Ok((g, m, a, b))
        })
        .collect::<Result<_>>()?;

    let mut report = new_report("project", exp);
    let mut trace = String::from(TRACE_HEADER);
    for (g, m, a, b) in &results {
        let data_tv = m.total_variation();
        let tol_tv = exp.tolerances.tol_seq_rel * data_tv;
        let converged = a.parts.iter().chain(&b.parts).all(|(_, r)| r.converged);
        report.converged &= converged;
        for (label, r) in a.parts.iter().chain(&b.parts) {
            trace_rows(&mut trace, label, g.n(), r);
        }
        let gap = a.measure.tv_distance(&b.measure)?;
        report.invariants.push(InvariantRow::at_most(
            format!("project vs variant [n={}]", g.n()),
            gap,
            2.0 * tol_tv,
            "TV distance, limit 2 tol_seq",
        ));
        report.invariants.push(InvariantRow::at_most(
            format!("|Pi mu| <= |mu| [n={}]", g.n()),
            a.measure.total_variation() - data_tv,
            tol_tv,
            "excess of total variation",
        ));
        let mut gs = GridSummary::new(g.n(), g.h());
        gs.projection = Some(ProjectionSummary {
            converged,
            atoms: atom_rows(&a.measure, m, None),
            density_mass: a.measure.density().integral(),
            projected_tv: a.measure.total_variation(),
            data_tv,
            tol_seq_tv: tol_tv,
            tv_project_vs_variant: gap,
        });
        report.grids.push(gs);
    }
    let n_atoms = results.first().map_or(0, |r| r.1.atoms().len());
    let mut series = Vec::new();
    let mut notes = Vec::new();
    for k in 0..n_atoms {
        let vals: Vec<f64> = results.iter().map(|(_, m, a, _)| atom_rows(&a.measure, m, None)[k].mass).collect();
        let label = format!("projection atom {k} mass");
        series.push(Series {
            label: label.clone(),
            points: results.iter().map(|r| r.0.h()).zip(vals.iter().copied()).collect(),
        });
        if let Some(e) = Extrapolated::fit(label, raw(&exp.grids, vals.into_iter())) {
            notes.push(format!("atom {k}: {:.5} ± {:.1e}", e.a0, e.error_estimate));
            report.extrapolations.push(e);
        }
    }
    io::write_atomic(&out.join("trace.csv"), trace.as_bytes())?;
    write_plot(
        out,
        "atom_mass.svg",
        &Plot {
            title: format!("projected atom mass, f = {}", exp.f_label()),
            x_label: "h".into(),
            y_label: "mass".into(),
            log_x: true,
            series,
            notes,
            ..Plot::default()
        },
    )?;
    report.finalize();
    Ok(report)
}

pub fn run_admissible(exp: &Experiment, out: &Path) -> Result<StudyReport> {
    let f = exp.f()?;
    let md = exp.measure()?;
    if exp.grids.len() < 3 {
        return Err(ConfigError {
            key: "grids".into(),
            msg: format!("admissibility needs at least 3 grids, got {}", exp.grids.len()),
        }
        .into());
    }
    let v = admissibility_check(f, &exp.grids, |g: &Grid| md.on(*g))?;
    let mut report = new_report("admissible", exp);
    let mut trace = String::from("n,h,i_h\n");
    for &(n, h, i) in &v.integrals {
        let _ = writeln!(trace, "{n},{h},{i}");
    }
    io::write_atomic(&out.join("trace.csv"), trace.as_bytes())?;
    write_plot(
        out,
        "admissibility.svg",
        &Plot {
            title: format!("I_h = h² Σ |f(·, G_h μ)|, f = {}", exp.f_label()),
            x_label: "h".into(),
            y_label: "I_h".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "I_h".into(),
                points: v.integrals.iter().map(|&(_, h, i)| (h, i)).collect(),
            }],
            notes: vec![
                format!("slope vs log(1/h): {:.3}", v.growth_exponent),
                format!("verdict: {}", v.verdict.name()),
            ],
        },
    )?;
    report.admissibility = Some(AdmissibilitySummary {
        integrals: v.integrals.iter().map(|&(n, h, i_h)| IntegralRow { n, h, i_h }).collect(),
        relative_increments: v.relative_increments.clone(),
        growth_exponent: v.growth_exponent,
        verdict: v.verdict.name(),
        cauchy_tol: v.cauchy_tol,
        divergence_threshold: v.divergence_threshold,
    });
    io::write_json(&out.join("verdict.json"), report.admissibility.as_ref().expect("just set"))?;
    report.finalize();
    Ok(report)
}

/// A priori bound along the mollification family on every grid.
pub fn run_sweep(exp: &Experiment, out: &Path) -> Result<StudyReport> {
    let f = exp.f()?;
    let md = exp.measure()?;
    let opts = exp.solve_options();
    let mut jobs = Vec::new();
    for &g in &exp.grids {
        let m = md.on(g)?;
        let sched = exp.mollification_indices.clone().unwrap_or_else(|| default_schedule(&m));
        for idx in sched {
            match build_kernel_with(idx, exp.profile, &g) {
                Ok(k) => jobs.push((g, k)),
                Err(Error::KernelTooNarrow { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let rows: Vec<(Grid, SweepRow)> = jobs
        .par_iter()
        .map(|(g, k)| -> Result<_> {
            let data = mollify_measure(&md.on(*g)?, k, g)?;
            let rep = accept_partial_solve(solve(f, &data, g, &opts))?;
            let ap = check_apriori_bound(&rep, f, &data, exp.q)?;
            Ok((
                *g,
                SweepRow {
                    index: k.index,
                    converged: rep.converged,
                    l1: rep.norms.l1,
                    w1q: rep.norms.w1q,
                    f_l1: rep.norms.f_l1,
                    lhs: ap.lhs,
                    rhs: ap.rhs,
                    ratio: ap.ratio(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    for &g in &exp.grids {
        if let Some((_, k)) = jobs.iter().rev().find(|(jg, _)| *jg == g) {
            write_kernel(out, &format!("kernel_{}", g.n()), k)?;
        }
    }

    let mut report = new_report("sweep", exp);
    let mut trace = String::from("n,index,converged,l1,w1q,f_l1,lhs,rhs,ratio\n");
    let mut series = Vec::new();
    for &g in &exp.grids {
        let mut gs = GridSummary::new(g.n(), g.h());
        for (_, r) in rows.iter().filter(|r| r.0 == g) {
            let _ = writeln!(
                trace,
                "{},{},{},{},{},{},{},{},{}",
                g.n(),
                r.index,
                r.converged,
                r.l1,
                r.w1q,
                r.f_l1,
                r.lhs,
                r.rhs,
                r.ratio
            );
            report.converged &= r.converged;
            gs.sweep.push(r.clone());
        }
        series.push(Series {
            label: format!("n = {}", g.n()),
            points: gs.sweep.iter().map(|r| (r.index, r.ratio)).collect(),
        });
        report.grids.push(gs);
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.1.ratio).collect();
    if !ratios.is_empty() {
        report.invariants.push(InvariantRow::at_most(
            "a priori ratio spread over the family",
            spread(&ratios),
            SPREAD_LIMIT,
            format!("{} solves, q = {}", ratios.len(), exp.q),
        ));
    }
    io::write_atomic(&out.join("trace.csv"), trace.as_bytes())?;
    write_plot(
        out,
        "apriori.svg",
        &Plot {
            title: format!("(‖u‖_W1q + ‖f(u)‖_L1) / (‖f(0)‖_L1 + ‖μ‖), f = {}", exp.f_label()),
            x_label: "mollification index".into(),
            y_label: "ratio".into(),
            log_x: true,
            series,
            ..Plot::default()
        },
    )?;
    report.finalize();
    Ok(report)
}
