//! The discrete Green operator `G_h = (-Δ_h)⁻¹`, the Green representation
//! residual, and the refinement test for `f(·, G μ) ∈ L¹`.
//!
//! The square's Green function differs from the disk's by a bounded harmonic
//! corrector, so integrability of `f(·, G μ)` depends only on the logarithmic
//! singularity `(m / 2π) log(1/r)` at each atom. For `f = -(e^{a y} - 1)⁺`
//! the integrand near an atom of mass `m₀` behaves like `r^{-a m₀ / 2π}`,
//! which is integrable in the plane iff `a m₀ < 4π`.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, GridFunction};
use crate::linalg::{CgOptions, ShiftedLaplacian};
use crate::math;
use crate::measure::Measure;
use crate::nonlinearity::Nonlinearity;
use crate::{Error, Result};

/// Default relative residual for Green solves.
pub const GREEN_TOL: f64 = 1e-12;

/// Solves `-Δ_h u = rhs` with zero boundary values.
pub fn green_solve(rhs: &GridFunction) -> Result<GridFunction> {
    let mut op = ShiftedLaplacian::laplacian(rhs.grid())?;
    green_solve_with(&mut op, rhs)
}

/// Same as [`green_solve`] but reuses a prepared operator.
pub fn green_solve_with(op: &mut ShiftedLaplacian, rhs: &GridFunction) -> Result<GridFunction> {
    op.grid().check_same(rhs.grid())?;
    let mut x = vec![0.0; rhs.grid().len()];
    op.solve(
        rhs.values(),
        &mut x,
        CgOptions {
            tol: GREEN_TOL,
            max_iter: 500,
        },
    )?;
    GridFunction::from_values(*rhs.grid(), x)
}

/// `G_h m`.
pub fn green_apply(m: &Measure, g: &Grid) -> Result<GridFunction> {
    g.check_same(m.grid())?;
    green_solve(&m.discretize())
}

/// `‖u - G_h(f(·, u)) - G_h m‖_{L¹}`, with the absorption evaluated at the
/// integration point, `f(y, u(y))`.
pub fn green_representation_residual(u: &GridFunction, f: &Nonlinearity, m: &Measure) -> Result<f64> {
    u.grid().check_same(m.grid())?;
    let rhs = f.apply(u)?.add(&m.discretize())?;
    let v = green_solve(&rhs)?;
    Ok(u.sub(&v)?.l1_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Admissible,
    NotAdmissible,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Admissible => "admissible",
            Verdict::NotAdmissible => "not_admissible",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityVerdict {
    /// `(n, h, I_h)` with `I_h = h² Σ |f(·, G_h μ)|`.
    pub integrals: Vec<(usize, f64, f64)>,
    /// `(I_{k+1} - I_k) / I_{k+1}` along the ladder.
    pub relative_increments: Vec<f64>,
    /// Least-squares slope of `log I_h` against `log(1/h)`.
    pub growth_exponent: f64,
    pub verdict: Verdict,
    pub cauchy_tol: f64,
    pub divergence_threshold: f64,
}

pub const CAUCHY_TOL: f64 = 0.02;
pub const DIVERGENCE_THRESHOLD: f64 = 0.1;

/// Evaluates `I_h` on every grid of `ladder`, with the measure rebuilt on each
/// grid by `measure`.
pub fn admissibility_check<M>(f: &Nonlinearity, ladder: &[Grid], measure: M) -> Result<AdmissibilityVerdict>
where
    M: Fn(&Grid) -> Result<Measure>,
{
    if ladder.len() < 3 {
        return Err(Error::LadderTooShort {
            required: 3,
            got: ladder.len(),
        });
    }
    if ladder.windows(2).any(|w| w[1].n() <= w[0].n()) {
        return Err(Error::Precondition("grid ladder must be strictly refining".into()));
    }
    let mut integrals = Vec::with_capacity(ladder.len());
    for g in ladder {
        let m = measure(g)?;
        let u = green_apply(&m, g)?;
        let i_h = f.apply(&u)?.l1_norm();
        integrals.push((g.n(), g.h(), i_h));
    }
    Ok(classify(integrals))
}

/// Verdict from a table of `(n, h, I_h)`.
pub fn classify(integrals: Vec<(usize, f64, f64)>) -> AdmissibilityVerdict {
    let relative_increments: Vec<f64> = integrals
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].2, w[1].2);
            if b == 0.0 && a == 0.0 {
                0.0
            } else {
                (b - a) / b.abs().max(a.abs())
            }
        })
        .collect();
    let all_zero = integrals.iter().all(|t| t.2 == 0.0);
    let growth_exponent = if all_zero {
        0.0
    } else {
        let pts: Vec<(f64, f64)> = integrals
            .iter()
            .filter(|t| t.2 > 0.0)
            .map(|t| (math::ln(1.0 / t.1), math::ln(t.2)))
            .collect();
        slope(&pts)
    };
    let verdict = if all_zero || relative_increments.iter().all(|r| r.abs() < CAUCHY_TOL) {
        Verdict::Admissible
    } else if growth_exponent > DIVERGENCE_THRESHOLD {
        Verdict::NotAdmissible
    } else {
        Verdict::Inconclusive
    };
    AdmissibilityVerdict {
        integrals,
        relative_increments,
        growth_exponent,
        verdict,
        cauchy_tol: CAUCHY_TOL,
        divergence_threshold: DIVERGENCE_THRESHOLD,
    }
}

/// Least-squares slope; 0 for fewer than two points.
pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
