//! Reduced measures and the projection onto good measures.
//!
//! Two limit schemes produce a limit solution `u*` on a fixed grid:
//! truncating the absorption to `f ∨ (-L)` along `L = 1, 2, 4, …`, or
//! mollifying the data along a halving support radius. The driving measure of
//! the limit is read back from the discrete residual.
//!
//! Extraction. Around each original atom a disk of radius
//! `ρ = max(√(h d), 1.5 h)` (`d` the atom's distance to the boundary, and at
//! least the kernel radius plus `h` for mollified data) collects the atom mass
//! as the net flux `h² Σ_disk (-Δ_h u*)`. This is the mass the limit solution
//! actually carries once absorption inside the disk has eaten what it can; it
//! converges to the reduced atom mass as the disk shrinks with `h`. Outside the
//! disks the density is the residual `-Δ_h u* - f(·, u*)`; inside it is lumped
//! into the atom. The residual alone cannot expose the reduction: every
//! discrete problem is solvable, so on a fixed grid the truncation ladder ends
//! with the full `μ_h` as its residual.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{neg_laplacian_into, Grid, GridFunction, Norms, Point};
use crate::math;
use crate::measure::{Atom, Measure};
use crate::mollify::{build_kernel_with, default_schedule, mollify_measure, Profile};
use crate::nonlinearity::Nonlinearity;
use crate::semilinear::{solve, SolveOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Truncation,
    Mollification,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Truncation => "truncation",
            Scheme::Mollification => "mollification",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// Truncation height or mollification index.
    pub level: f64,
    /// `‖u_k - u_{k-1}‖_{L¹}`; NaN on the first level.
    pub l1_increment: f64,
    pub norms: Norms,
    /// Atom masses extracted from this level's solution.
    pub atom_masses: Vec<f64>,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub u_star: GridFunction,
    pub extracted: Measure,
    /// Extraction disk radius of each atom.
    pub radii: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub scheme: Scheme,
    pub converged: bool,
    pub tol_seq: f64,
}

#[derive(Debug, Clone)]
pub struct ReductionOptions {
    pub solve: SolveOptions,
    /// `tol_seq = tol_seq_rel · ‖u_0‖_{L¹}`.
    pub tol_seq_rel: f64,
    /// Truncation heights; `2^j`, `j = 0..max_truncation_levels` by default.
    pub truncation_levels: Option<Vec<f64>>,
    pub max_truncation_levels: usize,
    /// Mollification indices; [`default_schedule`] by default.
    pub schedule: Option<Vec<f64>>,
    pub profile: Profile,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            tol_seq_rel: 1e-4,
            truncation_levels: None,
            max_truncation_levels: 60,
            schedule: None,
            profile: Profile::Bump,
        }
    }
}

/// Extraction disk radius for an atom at `p`.
pub fn extraction_radius(g: &Grid, p: Point, min_radius: f64) -> f64 {
    let h = g.h();
    let d = g.bounds().dist_to_boundary(p);
    math::sqrt(h * d).max(1.5 * h).max(min_radius)
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub measure: Measure,
    pub radii: Vec<f64>,
}

/// Reads the driving measure of `u` off its residual; see the module notes.
pub fn extract_measure(u: &GridFunction, f: &Nonlinearity, atoms: &[Point]) -> Result<Measure> {
    Ok(extract_measure_with(u, f, atoms, 0.0)?.measure)
}

pub fn extract_measure_with(
    u: &GridFunction,
    f: &Nonlinearity,
    atoms: &[Point],
    min_radius: f64,
) -> Result<Extraction> {
    let g = *u.grid();
    let h2 = g.h() * g.h();
    let mut lap = vec![0.0; g.len()];
    neg_laplacian_into(g.n(), g.h(), u.values(), &mut lap);
    let radii: Vec<f64> = atoms.iter().map(|&p| extraction_radius(&g, p, min_radius)).collect();
    let owner = disk_owners(&g, atoms, &radii);
    let mut masses = vec![0.0; atoms.len()];
    let mut density = vec![0.0; g.len()];
    for k in 0..g.len() {
        match owner[k] {
            Some(a) => masses[a] += h2 * lap[k],
            None => density[k] = lap[k] - f.eval(g.node_at(k), u.values()[k]),
        }
    }
    let atoms = atoms
        .iter()
        .zip(&masses)
        .map(|(&point, &mass)| Atom { point, mass })
        .collect();
    Ok(Extraction {
        measure: Measure::new(GridFunction::from_values(g, density)?, atoms)?,
        radii,
    })
}

/// For each node, the atom whose disk contains it (nearest atom on overlap).
fn disk_owners(g: &Grid, atoms: &[Point], radii: &[f64]) -> Vec<Option<usize>> {
    (0..g.len())
        .map(|k| {
            let x = g.node_at(k);
            atoms
                .iter()
                .enumerate()
                .filter(|(a, p)| x.dist(**p) <= radii[*a])
                .min_by(|(_, p), (_, q)| x.dist(**p).total_cmp(&x.dist(**q)))
                .map(|(a, _)| a)
        })
        .collect()
}

/// `m` with its density inside the extraction disks moved into the atoms, the
/// form in which extraction reports a measure.
pub fn lump(m: &Measure, radii: &[f64]) -> Result<Measure> {
    let g = *m.grid();
    let pts: Vec<Point> = m.atoms().iter().map(|a| a.point).collect();
    if radii.len() != pts.len() {
        return Err(Error::Precondition("one radius per atom".into()));
    }
    let owner = disk_owners(&g, &pts, radii);
    let h2 = g.h() * g.h();
    let mut atoms = m.atoms().to_vec();
    let mut density = m.density().values().to_vec();
    for k in 0..g.len() {
        if let Some(a) = owner[k] {
            atoms[a].mass += h2 * density[k];
            density[k] = 0.0;
        }
    }
    Measure::new(GridFunction::from_values(g, density)?, atoms)
}

fn atom_points(m: &Measure) -> Vec<Point> {
    m.atoms().iter().map(|a| a.point).collect()
}

fn trace_entry(
    level: f64,
    prev: Option<&GridFunction>,
    u: &GridFunction,
    f: &Nonlinearity,
    atoms: &[Point],
    min_radius: f64,
    newton_iters: usize,
    q: f64,
) -> Result<TraceEntry> {
    let l1_increment = match prev {
        Some(p) => u.sub(p)?.l1_norm(),
        None => f64::NAN,
    };
    let ex = extract_measure_with(u, f, atoms, min_radius)?;
    Ok(TraceEntry {
        level,
        l1_increment,
        norms: u.norms(q)?,
        atom_masses: ex.measure.atoms().iter().map(|a| a.mass).collect(),
        newton_iters,
    })
}

/// Solves with `f ∨ (-L)` along the truncation ladder, warm-starting each
/// level, until the `L¹` increment drops to `tol_seq`.
pub fn reduce_by_truncation(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<ReductionResult> {
    let g = *m.grid();
    let levels: Vec<f64> = match &opts.truncation_levels {
        Some(l) => l.clone(),
        None => (0..opts.max_truncation_levels).map(|j| math::powf(2.0, j as f64)).collect(),
    };
    if levels.is_empty() {
        return Err(Error::LadderTooShort { required: 1, got: 0 });
    }
    if opts.solve.certify {
        f.certify_monotone(&g)?;
    }
    let atoms = atom_points(m);
    let mut sopts = opts.solve.clone();
    sopts.certify = false;
    let mut trace = Vec::new();
    let mut prev: Option<GridFunction> = None;
    let mut tol_seq = 0.0;
    let mut converged = false;
    for (j, &level) in levels.iter().enumerate() {
        let fl = f.truncate(level);
        sopts.initial_guess = prev.clone();
        let rep = solve(&fl, m, &g, &sopts)?;
        let entry = trace_entry(level, prev.as_ref(), &rep.u, f, &atoms, 0.0, rep.newton_iters, sopts.q)?;
        if j == 0 {
            tol_seq = opts.tol_seq_rel * rep.u.l1_norm();
        }
        let inc = entry.l1_increment;
        trace.push(entry);
        prev = Some(rep.u);
        if j > 0 && inc <= tol_seq {
            converged = true;
            break;
        }
    }
    finish(f, prev.expect("at least one level"), &atoms, 0.0, trace, Scheme::Truncation, converged, tol_seq)
}

/// Solves `-Δ_h u = f(·, u) + ρ_{n_k} ∗ μ` along the mollification schedule.
/// The ladder is accepted when an increment drops to `tol_seq`, or when the
/// geometric tail `inc · q / (1 - q)` (with `q` the last increment ratio)
/// does.
pub fn reduce_by_mollification(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<ReductionResult> {
    let g = *m.grid();
    let schedule = match &opts.schedule {
        Some(s) => s.clone(),
        None => default_schedule(m),
    };
    if schedule.is_empty() {
        return Err(Error::LadderTooShort { required: 1, got: 0 });
    }
    if opts.solve.certify {
        f.certify_monotone(&g)?;
    }
    let atoms = atom_points(m);
    let mut sopts = opts.solve.clone();
    sopts.certify = false;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut prev: Option<GridFunction> = None;
    let mut tol_seq = 0.0;
    let mut converged = false;
    let mut min_radius = 0.0;
    for (k, &idx) in schedule.iter().enumerate() {
        let kernel = build_kernel_with(idx, opts.profile, &g)?;
        let data = mollify_measure(m, &kernel, &g)?;
        sopts.initial_guess = prev.clone();
        let rep = solve(f, &data, &g, &sopts)?;
        min_radius = kernel.radius() + g.h();
        let entry = trace_entry(idx, prev.as_ref(), &rep.u, f, &atoms, min_radius, rep.newton_iters, sopts.q)?;
        if k == 0 {
            tol_seq = opts.tol_seq_rel * rep.u.l1_norm();
        }
        let inc = entry.l1_increment;
        let before = trace.last().map(|e| e.l1_increment);
        trace.push(entry);
        prev = Some(rep.u);
        if k > 0 {
            let tail = match before {
                Some(b) if b.is_finite() && inc < b => {
                    let q = inc / b;
                    inc * q / (1.0 - q)
                }
                _ => f64::INFINITY,
            };
            // keep refining while the schedule allows; judge at the end
            converged = inc <= tol_seq || tail <= tol_seq;
        }
    }
    finish(f, prev.expect("at least one level"), &atoms, min_radius, trace, Scheme::Mollification, converged, tol_seq)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    f: &Nonlinearity,
    u_star: GridFunction,
    atoms: &[Point],
    min_radius: f64,
    trace: Vec<TraceEntry>,
    scheme: Scheme,
    converged: bool,
    tol_seq: f64,
) -> Result<ReductionResult> {
    let ex = extract_measure_with(&u_star, f, atoms, min_radius)?;
    let result = ReductionResult {
        u_star,
        extracted: ex.measure,
        radii: ex.radii,
        trace,
        scheme,
        converged,
        tol_seq,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NonConvergedSequence(Box::new(result)))
    }
}

/// `‖a.u* - b.u*‖_{L¹} / ‖b.u*‖_{L¹}`.
pub fn relative_l1_gap(a: &ReductionResult, b: &ReductionResult) -> Result<f64> {
    let d = a.u_star.sub(&b.u_star)?.l1_norm();
    let s = b.u_star.l1_norm();
    Ok(if s == 0.0 { d } else { d / s })
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub measure: Measure,
    /// Reduction of `μ⁺`, absent when `μ⁺ = 0`.
    pub positive: Option<ReductionResult>,
    /// Reduction of `μ⁻` under the reflected nonlinearity.
    pub negative: Option<ReductionResult>,
}

fn reduce_part(f: &Nonlinearity, part: &Measure, opts: &ReductionOptions) -> Result<Option<ReductionResult>> {
    if part.is_zero() {
        Ok(None)
    } else {
        reduce_by_truncation(f, part, opts).map(Some)
    }
}

fn assemble(g: Grid, pos: Option<ReductionResult>, neg: Option<ReductionResult>) -> Result<Projection> {
    let mut measure = Measure::zero(g);
    if let Some(p) = &pos {
        measure = measure.add(&p.extracted)?;
    }
    if let Some(q) = &neg {
        measure = measure.sub(&q.extracted)?;
    }
    Ok(Projection {
        measure,
        positive: pos,
        negative: neg,
    })
}

/// `Π_f(μ) = (μ⁺)^{*,f} - (μ⁻)^{*,f̃}` by the truncation scheme.
pub fn project_detailed(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<Projection> {
    let (p, q) = m.jordan_decompose();
    let pos = reduce_part(f, &p, opts)?;
    let neg = reduce_part(&f.reflect(), &q, opts)?;
    assemble(*m.grid(), pos, neg)
}

pub fn project(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<Measure> {
    Ok(project_detailed(f, m, opts)?.measure)
}

/// `(μ⁺)^{*,-f⁻} - (μ⁻)^{*,(f⁺)~}`.
pub fn project_variant_detailed(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<Projection> {
    let (p, q) = m.jordan_decompose();
    let pos = reduce_part(&f.negative_part(), &p, opts)?;
    let neg = reduce_part(&f.positive_part().reflect(), &q, opts)?;
    assemble(*m.grid(), pos, neg)
}

pub fn project_variant(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<Measure> {
    Ok(project_variant_detailed(f, m, opts)?.measure)
}

/// TV discrepancies of the identities satisfied by the reduced measure of a
/// nonnegative `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// `‖(μ⁺)* - (μ*)⁺‖_υ`.
    pub positive_part: f64,
    /// `‖(μ_c)* - (μ*)_c‖_υ`.
    pub concentrated: f64,
    /// `‖(μ*)_d - μ_d‖_υ`.
    pub diffuse: f64,
    /// `‖μ_d‖_υ`, the scale of the diffuse comparison.
    pub diffuse_mass: f64,
    /// `|μ*|(D) - |μ|(D)`.
    pub tv_excess: f64,
    /// `1e-4 ‖μ‖_υ`.
    pub tol_seq_tv: f64,
    /// Density mass of `μ` inside the extraction disks, which extraction
    /// reports as atom mass.
    pub lumped_mass: f64,
}

impl IdentityReport {
    /// Contract `discrepancy < 3 tol_seq + lumped mass` on the two reduction
    /// identities and `|μ*| ≤ |μ| + tol`.
    pub fn holds(&self) -> bool {
        let tol = 3.0 * self.tol_seq_tv + self.lumped_mass;
        self.positive_part < tol && self.concentrated < tol && self.tv_excess <= tol
    }
}

pub fn check_reduction_identities(f: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<IdentityReport> {
    if !m.is_nonnegative() {
        return Err(Error::NotPositive);
    }
    let tol_seq_tv = opts.tol_seq_rel * m.total_variation();
    if m.is_zero() {
        return Ok(IdentityReport {
            positive_part: 0.0,
            concentrated: 0.0,
            diffuse: 0.0,
            diffuse_mass: 0.0,
            tv_excess: 0.0,
            tol_seq_tv,
            lumped_mass: 0.0,
        });
    }
    let star = reduce_by_truncation(f, m, opts)?;
    let mu_star = &star.extracted;
    let (star_pos, _) = mu_star.jordan_decompose();
    // μ ≥ 0, so (μ⁺)* is μ* itself
    let positive_part = mu_star.tv_distance(&star_pos)?;

    let (mu_d, mu_c) = m.split_diffuse_concentrated();
    let (star_d, star_c) = mu_star.split_diffuse_concentrated();
    let concentrated = match reduce_part(f, &mu_c, opts)? {
        Some(r) => r.extracted.split_diffuse_concentrated().1.tv_distance(&star_c)?,
        None => star_c.total_variation(),
    };
    let diffuse = star_d.tv_distance(&mu_d)?;
    let lumped = lump(m, &star.radii)?;
    let lumped_mass = lumped.atom_mass() - m.atom_mass();
    Ok(IdentityReport {
        positive_part,
        concentrated,
        diffuse,
        diffuse_mass: mu_d.total_variation(),
        tv_excess: mu_star.total_variation() - m.total_variation(),
        tol_seq_tv,
        lumped_mass: lumped_mass.abs(),
    })
}

/// `‖μ^{*,f₁} - μ^{*,f₂}‖_υ`; small when `|f₁ - f₂|` is bounded by an
/// integrable function.
pub fn perturbation_invariance(f1: &Nonlinearity, f2: &Nonlinearity, m: &Measure, opts: &ReductionOptions) -> Result<f64> {
    let a = reduce_by_truncation(f1, m, opts)?;
    let b = reduce_by_truncation(f2, m, opts)?;
    a.extracted.tv_distance(&b.extracted)
}

/// Order check `extracted ≤ μ + tol` for nonnegative data, with `μ` lumped
/// onto the same disks as the extraction.
pub fn extracted_below_data(result: &ReductionResult, m: &Measure, tol: f64) -> Result<bool> {
    let lumped = lump(m, &result.radii)?;
    let ok_atoms = result
        .extracted
        .atoms()
        .iter()
        .zip(lumped.atoms())
        .all(|(e, l)| e.mass <= l.mass + tol);
    let ok_density = result
        .extracted
        .density()
        .values()
        .iter()
        .zip(lumped.density().values())
        .all(|(e, l)| *e <= l + tol);
    Ok(ok_atoms && ok_density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green_apply;
    use core::f64::consts::PI;

    #[test]
    fn linear_potential_extracts_exact_atom() {
        let g = Grid::unit_square(63).unwrap();
        let c = Point::new(0.5, 0.5);
        let m = Measure::dirac(g, c, 2.5).unwrap();
        let u = green_apply(&m, &g).unwrap();
        let e = extract_measure(&u, &Nonlinearity::Zero, &[c]).unwrap();
        assert!((e.atoms()[0].mass - 2.5).abs() < 1e-9);
        assert!(e.density().linf_norm() < 1e-6);
    }

    #[test]
    fn bounded_f_truncation_is_plain_solve() {
        let g = Grid::unit_square(31).unwrap();
        let m = Measure::dirac(g, Point::new(0.5, 0.5), 1.0).unwrap();
        // |f| <= 1 so every truncation at height >= 1 is inactive
        let f = Nonlinearity::custom("-tanh(y)", |_, y| -libm::tanh(y));
        let r = reduce_by_truncation(&f, &m, &ReductionOptions::default()).unwrap();
        let plain = solve(&f, &m, &g, &SolveOptions::default()).unwrap();
        assert!(r.u_star.sub(&plain.u).unwrap().linf_norm() < 1e-9);
        assert_eq!(r.trace.len(), 2);
    }

    #[test]
    fn condition_b_makes_negative_data_linear() {
        let g = Grid::unit_square(31).unwrap();
        let m = Measure::dirac(g, Point::new(0.5, 0.5), -3.0).unwrap();
        let f = Nonlinearity::Exp { a: 2.0 };
        let r = reduce_by_mollification(&f, &m, &ReductionOptions::default());
        let r = match r {
            Ok(r) => r,
            Err(Error::NonConvergedSequence(r)) => *r,
            Err(e) => panic!("{e}"),
        };
        let k = build_kernel_with(*r.trace.last().map(|t| &t.level).unwrap(), Profile::Bump, &g).unwrap();
        let lin = green_apply(&mollify_measure(&m, &k, &g).unwrap(), &g).unwrap();
        assert!(r.u_star.sub(&lin).unwrap().linf_norm() < 1e-9);
        assert!((r.extracted.atoms()[0].mass + 3.0).abs() < 1e-8);
    }

    #[test]
    fn projection_fixes_densities() {
        let g = Grid::unit_square(31).unwrap();
        let d = GridFunction::from_fn(g, |p| if p.x < 0.5 { 2.0 } else { -1.0 }).unwrap();
        let m = Measure::from_density(d);
        let p = project(&Nonlinearity::Exp { a: 1.0 }, &m, &ReductionOptions::default()).unwrap();
        assert!(p.tv_distance(&m).unwrap() < 1e-6);
        assert!(project(&Nonlinearity::Exp { a: 1.0 }, &Measure::zero(g), &ReductionOptions::default())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn reflected_part_is_linear_for_exponential_absorption() {
        let g = Grid::unit_square(31).unwrap();
        let m = Measure::dirac(g, Point::new(0.5, 0.5), -4.0 * PI).unwrap();
        let p = project(&Nonlinearity::Exp { a: 2.0 }, &m, &ReductionOptions::default()).unwrap();
        assert!((p.atoms()[0].mass + 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn lump_moves_disk_density_into_atoms() {
        let g = Grid::unit_square(31).unwrap();
        let m = Measure::new(GridFunction::constant(g, 1.0), vec![Atom::new(0.5, 0.5, 1.0)]).unwrap();
        let l = lump(&m, &[0.1]).unwrap();
        assert!((l.total_mass() - m.total_mass()).abs() < 1e-12);
        assert!(l.atoms()[0].mass > 1.0 + 0.8 * PI * 0.01);
    }
}
