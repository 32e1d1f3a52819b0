//! The discrete problem `-Δ_h u = f(·, u) + μ_h` at interior nodes.
//!
//! Damped Newton: each step solves with `-Δ_h + diag(-∂_y f)`, an M-matrix
//! because `f` is non-increasing, and the step is halved until `‖F‖∞`
//! decreases. If the line search stalls the solver runs nonlinear
//! Gauss-Seidel sweeps, each node solving its own scalar monotone equation by
//! safeguarded Newton, then hands back to Newton.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{neg_laplacian_into, Grid, GridFunction, Norms, Point};
use crate::linalg::{CgOptions, ShiftedLaplacian};
use crate::measure::Measure;
use crate::nonlinearity::Nonlinearity;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// `tol_abs = rel_tol · (1 + ‖μ_h‖∞)`.
    pub rel_tol: f64,
    pub max_newton: usize,
    pub cg_tol: f64,
    /// Sweeps per fallback episode.
    pub fallback_sweeps: usize,
    pub max_fallbacks: usize,
    /// Sample `f` for monotonicity before solving.
    pub certify: bool,
    /// Sobolev exponent of the reported `W^{1,q}` norm.
    pub q: f64,
    pub initial_guess: Option<GridFunction>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_newton: 200,
            cg_tol: 1e-12,
            fallback_sweeps: 50,
            max_fallbacks: 20,
            certify: true,
            q: 1.5,
            initial_guess: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormTable {
    pub l1: f64,
    pub linf: f64,
    pub w1q: f64,
    /// `‖f(·, u)‖_{L¹}`.
    pub f_l1: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub u: GridFunction,
    pub newton_iters: usize,
    pub fallback_sweeps: usize,
    /// `‖-Δ_h u - f(·, u) - μ_h‖∞`.
    pub final_residual: f64,
    pub tol_abs: f64,
    pub converged: bool,
    pub norms: NormTable,
}

struct Problem<'a> {
    f: &'a Nonlinearity,
    grid: Grid,
    nodes: Vec<Point>,
    rhs: &'a [f64],
}

impl Problem<'_> {
    /// Residual into `out`; returns its max norm (infinite if not finite).
    fn residual(&self, u: &[f64], out: &mut [f64]) -> f64 {
        neg_laplacian_into(self.grid.n(), self.grid.h(), u, out);
        let mut m = 0.0f64;
        for k in 0..u.len() {
            out[k] -= self.f.eval(self.nodes[k], u[k]) + self.rhs[k];
            let a = out[k].abs();
            if !a.is_finite() {
                return f64::INFINITY;
            }
            m = m.max(a);
        }
        m
    }

    fn gauss_seidel(&self, u: &mut [f64]) {
        let n = self.grid.n();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                let mut s = 0.0;
                if i > 0 {
                    s += u[k - 1];
                }
                if i + 1 < n {
                    s += u[k + 1];
                }
                if j > 0 {
                    s += u[k - n];
                }
                if j + 1 < n {
                    s += u[k + n];
                }
                let b = self.rhs[k] + s * inv_h2;
                u[k] = scalar_solve(self.f, self.nodes[k], 4.0 * inv_h2, b, u[k]);
            }
        }
    }
}

/// Root of the increasing map `t ↦ a t - f(x, t) - b`, starting near `t0`.
fn scalar_solve(f: &Nonlinearity, x: Point, a: f64, b: f64, t0: f64) -> f64 {
    let g = |t: f64| a * t - f.eval(x, t) - b;
    let gt = g(t0);
    if gt == 0.0 {
        return t0;
    }
    // bracket by doubling steps away from t0
    let (mut lo, mut hi) = (t0, t0);
    let mut step = (b / a).abs().max(1e-3 * (1.0 + t0.abs()));
    if gt > 0.0 {
        loop {
            lo -= step;
            step *= 2.0;
            let v = g(lo);
            if v <= 0.0 {
                break;
            }
        }
    } else {
        loop {
            hi += step;
            step *= 2.0;
            let v = g(hi);
            if v >= 0.0 || v.is_nan() || !v.is_finite() {
                break;
            }
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = g(t);
        if v.is_finite() {
            if v > 0.0 {
                hi = t;
            } else if v < 0.0 {
                lo = t;
            } else {
                return t;
            }
        } else {
            hi = t;
        }
        if hi - lo <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
        let d = a - f.deriv(x, t).min(0.0);
        let tn = t - v / d;
        t = if v.is_finite() && tn > lo && tn < hi { tn } else { 0.5 * (lo + hi) };
    }
    t
}

/// `1e-8 (1 + ‖μ_h‖∞)` for the default relative tolerance.
pub fn default_tol_abs(rhs: &GridFunction, rel_tol: f64) -> f64 {
    rel_tol * (1.0 + rhs.linf_norm())
}

pub fn solve(f: &Nonlinearity, m: &Measure, g: &Grid, opts: &SolveOptions) -> Result<SolveReport> {
    g.check_same(m.grid())?;
    solve_rhs(f, &m.discretize(), opts)
}

/// Solves with an explicit nodal right-hand side `μ_h`.
pub fn solve_rhs(f: &Nonlinearity, rhs: &GridFunction, opts: &SolveOptions) -> Result<SolveReport> {
    let grid = *rhs.grid();
    if opts.certify {
        f.certify_monotone(&grid)?;
    }
    let p = Problem {
        f,
        grid,
        nodes: (0..grid.len()).map(|k| grid.node_at(k)).collect(),
        rhs: rhs.values(),
    };
    let tol_abs = default_tol_abs(rhs, opts.rel_tol);
    let dim = grid.len();
    let mut u = match &opts.initial_guess {
        Some(u0) => {
            grid.check_same(u0.grid())?;
            u0.values().to_vec()
        }
        None => vec![0.0; dim],
    };
    let mut r = vec![0.0; dim];
    let mut res = p.residual(&u, &mut r);
    if !res.is_finite() {
        // a poor warm start; restart from zero
        u.iter_mut().for_each(|v| *v = 0.0);
        res = p.residual(&u, &mut r);
    }
    let mut trial = vec![0.0; dim];
    let mut r_trial = vec![0.0; dim];
    let mut du = vec![0.0; dim];
    let mut newton_iters = 0;
    let mut sweeps = 0;
    let mut fallbacks = 0;
    let cg = CgOptions {
        tol: opts.cg_tol,
        max_iter: 1000,
    };
    while res > tol_abs && newton_iters < opts.max_newton {
        newton_iters += 1;
        let diag: Vec<f64> = (0..dim)
            .map(|k| {
                let d = -f.deriv(p.nodes[k], u[k]);
                if d.is_finite() {
                    d.max(0.0)
                } else {
                    1e300
                }
            })
            .collect();
        let mut op = ShiftedLaplacian::new(&grid, diag)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        du.iter_mut().for_each(|v| *v = 0.0);
        // an unconverged Krylov solve still yields a usable descent direction
        let _ = op.solve(&neg_r, &mut du, cg);
        let linear_ok = du.iter().all(|v| v.is_finite());
        let mut accepted = false;
        if linear_ok {
            let mut t = 1.0;
            while t > 1e-12 {
                for k in 0..dim {
                    trial[k] = u[k] + t * du[k];
                }
                let rt = p.residual(&trial, &mut r_trial);
                if rt < res {
                    core::mem::swap(&mut u, &mut trial);
                    core::mem::swap(&mut r, &mut r_trial);
                    res = rt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            if fallbacks >= opts.max_fallbacks {
                break;
            }
            fallbacks += 1;
            for _ in 0..opts.fallback_sweeps {
                p.gauss_seidel(&mut u);
                sweeps += 1;
            }
            res = p.residual(&u, &mut r);
        }
    }
    let u = GridFunction::from_values(grid, u)?;
    let fu = f.apply(&u)?;
    let Norms { l1, linf, w1q } = u.norms(opts.q)?;
    let report = SolveReport {
        u,
        newton_iters,
        fallback_sweeps: sweeps,
        final_residual: res,
        tol_abs,
        converged: res <= tol_abs,
        norms: NormTable {
            l1,
            linf,
            w1q,
            f_l1: fu.l1_norm(),
        },
    };
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NonConverged(Box::new(report)))
    }
}

/// `-Δ_h u - f(·, u) - μ_h` at every node.
pub fn residual_field(u: &GridFunction, f: &Nonlinearity, m: &Measure) -> Result<GridFunction> {
    u.grid().check_same(m.grid())?;
    let g = *u.grid();
    let mut out = vec![0.0; g.len()];
    neg_laplacian_into(g.n(), g.h(), u.values(), &mut out);
    let rhs = m.discretize();
    for (k, o) in out.iter_mut().enumerate() {
        *o -= f.eval(g.node_at(k), u.values()[k]) + rhs.values()[k];
    }
    GridFunction::from_values(g, out)
}

/// `-Δ_h u ≤ f(·, u) + μ_h + tol` at every node.
pub fn verify_subsolution(u: &GridFunction, f: &Nonlinearity, m: &Measure, tol: f64) -> Result<bool> {
    Ok(residual_field(u, f, m)?.values().iter().all(|&r| r <= tol))
}

/// `-Δ_h u ≥ f(·, u) + μ_h - tol` at every node.
pub fn verify_supersolution(u: &GridFunction, f: &Nonlinearity, m: &Measure, tol: f64) -> Result<bool> {
    Ok(residual_field(u, f, m)?.values().iter().all(|&r| r >= -tol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    /// `max (u₁ - u₂)⁺`.
    pub max_violation: f64,
    pub holds: bool,
}

pub const COMPARISON_TOL: f64 = 1e-10;

/// Solves both problems and checks `u₁ ≤ u₂ + 1e-10`. Requires `μ₁ ≤ μ₂`
/// nodewise and `f₁ ≤ f₂` on the sample lattice.
pub fn check_comparison(
    f1: &Nonlinearity,
    m1: &Measure,
    f2: &Nonlinearity,
    m2: &Measure,
    opts: &SolveOptions,
) -> Result<ComparisonReport> {
    let g = *m1.grid();
    if !m1.le(m2, 0.0)? {
        return Err(Error::Precondition("comparison needs m1 <= m2".into()));
    }
    if !f1.le_on_samples(f2, &g) {
        return Err(Error::Precondition("comparison needs f1 <= f2".into()));
    }
    let u1 = solve(f1, m1, &g, opts)?.u;
    let u2 = solve(f2, m2, &g, opts)?.u;
    let max_violation = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);
    Ok(ComparisonReport {
        max_violation,
        holds: max_violation <= COMPARISON_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriBound {
    /// `‖u‖_{W^{1,q}} + ‖f(·, u)‖_{L¹}`.
    pub lhs: f64,
    /// `‖f(·, 0)‖_{L¹} + ‖μ‖_υ`.
    pub rhs: f64,
}

impl AprioriBound {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

pub fn check_apriori_bound(report: &SolveReport, f: &Nonlinearity, m: &Measure, q: f64) -> Result<AprioriBound> {
    let u = &report.u;
    let lhs = u.w1q_norm(q)? + f.apply(u)?.l1_norm();
    let rhs = f.at_zero(*u.grid())?.l1_norm() + m.total_variation();
    Ok(AprioriBound { lhs, rhs })
}
