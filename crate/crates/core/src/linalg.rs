//! Linear solves with the SPD operator `A = -Δ_h + diag(d)`, `d >= 0`.
//!
//! Conjugate gradients preconditioned by one symmetric geometric multigrid
//! V-cycle. Coarsening halves `n + 1` while `n` is odd, so grids with
//! `n = 2^k - 1` coarsen all the way down; the coarsest level is factored with
//! a banded Cholesky decomposition. The coarse operators are rediscretized
//! (`-Δ_{2h}` plus the full-weighted diagonal), which keeps every level SPD.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{neg_laplacian_into, Grid};
use crate::math;
use crate::{Error, Result};

/// Largest coarse system factored directly; beyond this the hierarchy keeps
/// coarsening even if that means a deeper V-cycle.
const COARSE_DIRECT_MAX_N: usize = 7;

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `‖b - Ax‖₂ <= tol ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
struct Level {
    n: usize,
    h: f64,
    diag: Vec<f64>,
    // scratch
    r: Vec<f64>,
    e: Vec<f64>,
}

impl Level {
    fn new(n: usize, h: f64, diag: Vec<f64>) -> Self {
        Self {
            n,
            h,
            diag,
            r: vec![0.0; n * n],
            e: vec![0.0; n * n],
        }
    }
}

/// Banded Cholesky factor of an SPD matrix with half-bandwidth `bw`.
#[derive(Debug, Clone)]
struct BandCholesky {
    dim: usize,
    bw: usize,
    // l[i * (bw + 1) + (i - k)] holds L[i][k] for i - bw <= k <= i
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(n: usize, h: f64, diag: &[f64]) -> Result<Self> {
        let dim = n * n;
        let bw = n;
        let w = bw + 1;
        let inv_h2 = 1.0 / (h * h);
        let entry = |i: usize, k: usize| -> f64 {
            // A[i][k], k <= i
            if i == k {
                4.0 * inv_h2 + diag[i]
            } else if i - k == 1 && i % n != 0 {
                -inv_h2
            } else if i - k == n {
                -inv_h2
            } else {
                0.0
            }
        };
        let mut l = vec![0.0; dim * w];
        for i in 0..dim {
            let k0 = i.saturating_sub(bw);
            for k in k0..=i {
                let mut s = entry(i, k);
                let m0 = k0.max(k.saturating_sub(bw));
                for m in m0..k {
                    s -= l[i * w + (i - m)] * l[k * w + (k - m)];
                }
                if k == i {
                    if !(s > 0.0) {
                        return Err(Error::LinearSolve {
                            residual: f64::NAN,
                            iterations: 0,
                        });
                    }
                    l[i * w] = math::sqrt(s);
                } else {
                    l[i * w + (i - k)] = s / l[k * w];
                }
            }
        }
        Ok(Self { dim, bw, l })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let w = self.bw + 1;
        x.copy_from_slice(b);
        for i in 0..self.dim {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..self.dim).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.bw + 1).min(self.dim) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

/// Multigrid hierarchy for `-Δ_h + diag(d)` on one grid; reusable across
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian {
    grid: Grid,
    levels: Vec<Level>,
    coarse: BandCholesky,
}

impl ShiftedLaplacian {
    /// Pure `-Δ_h`.
    pub fn laplacian(grid: &Grid) -> Result<Self> {
        Self::new(grid, vec![0.0; grid.len()])
    }

    pub fn new(grid: &Grid, diag: Vec<f64>) -> Result<Self> {
        if diag.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if diag.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::NonFinite("shift diagonal (must be finite and >= 0)"));
        }
        let mut levels = vec![Level::new(grid.n(), grid.h(), diag)];
        loop {
            let fine = levels.last().unwrap();
            if fine.n % 2 == 0 || fine.n <= COARSE_DIRECT_MAX_N {
                break;
            }
            let nc = (fine.n - 1) / 2;
            let mut dc = vec![0.0; nc * nc];
            restrict(fine.n, &fine.diag, nc, &mut dc);
            let hc = 2.0 * fine.h;
            levels.push(Level::new(nc, hc, dc));
        }
        let last = levels.last().unwrap();
        let coarse = BandCholesky::factor(last.n, last.h, &last.diag)?;
        Ok(Self {
            grid: *grid,
            levels,
            coarse,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.levels[0].diag
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        apply_level(self.grid.n(), self.grid.h(), &self.levels[0].diag, u, out);
    }

    /// Solves `A x = b` by preconditioned CG starting from `x`.
    pub fn solve(&mut self, b: &[f64], x: &mut [f64], opts: CgOptions) -> Result<CgStats> {
        let dim = self.grid.len();
        let bnorm = dot(b, b).sqrt_nonneg();
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(CgStats {
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let mut r = vec![0.0; dim];
        self.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut z = vec![0.0; dim];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut ap = vec![0.0; dim];
        let mut rz = dot(&r, &z);
        let mut rel = dot(&r, &r).sqrt_nonneg() / bnorm;
        if rel <= opts.tol {
            return Ok(CgStats {
                iterations: 0,
                relative_residual: rel,
            });
        }
        for it in 1..=opts.max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::LinearSolve {
                    residual: rel,
                    iterations: it,
                });
            }
            let alpha = rz / pap;
            for k in 0..dim {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            rel = dot(&r, &r).sqrt_nonneg() / bnorm;
            if !rel.is_finite() {
                break;
            }
            if rel <= opts.tol {
                return Ok(CgStats {
                    iterations: it,
                    relative_residual: rel,
                });
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..dim {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::LinearSolve {
            residual: rel,
            iterations: opts.max_iter,
        })
    }

    /// `z = M⁻¹ r` with one V(1,1) cycle from a zero initial guess.
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) {
        self.levels[0].r.copy_from_slice(r);
        self.vcycle(0);
        z.copy_from_slice(&self.levels[0].e);
    }

    fn vcycle(&mut self, l: usize) {
        if l + 1 == self.levels.len() {
            let lev = &mut self.levels[l];
            self.coarse.solve(&lev.r, &mut lev.e);
            return;
        }
        {
            let lev = &mut self.levels[l];
            lev.e.iter_mut().for_each(|v| *v = 0.0);
            rb_gauss_seidel(lev.n, lev.h, &lev.diag, &lev.r, &mut lev.e, false);
        }
        // residual of the smoothed error, restricted to the coarse level
        let (head, tail) = self.levels.split_at_mut(l + 1);
        let fine = &mut head[l];
        let coarse = &mut tail[0];
        let mut res = vec![0.0; fine.n * fine.n];
        apply_level(fine.n, fine.h, &fine.diag, &fine.e, &mut res);
        for (v, rv) in res.iter_mut().zip(&fine.r) {
            *v = rv - *v;
        }
        restrict(fine.n, &res, coarse.n, &mut coarse.r);
        self.vcycle(l + 1);
        let (head, tail) = self.levels.split_at_mut(l + 1);
        let fine = &mut head[l];
        let coarse = &tail[0];
        prolong_add(coarse.n, &coarse.e, fine.n, &mut fine.e);
        rb_gauss_seidel(fine.n, fine.h, &fine.diag, &fine.r, &mut fine.e, true);
    }
}

trait SqrtNonneg {
    fn sqrt_nonneg(self) -> f64;
}

impl SqrtNonneg for f64 {
    fn sqrt_nonneg(self) -> f64 {
        math::sqrt(self.max(0.0))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_level(n: usize, h: f64, diag: &[f64], u: &[f64], out: &mut [f64]) {
    neg_laplacian_into(n, h, u, out);
    for k in 0..n * n {
        out[k] += diag[k] * u[k];
    }
}

/// Red-black Gauss-Seidel sweep; `reverse` swaps the colour order so the
/// pre- and post-smoothers are adjoint.
fn rb_gauss_seidel(n: usize, h: f64, diag: &[f64], b: &[f64], e: &mut [f64], reverse: bool) {
    let inv_h2 = 1.0 / (h * h);
    let colours: [usize; 2] = if reverse { [1, 0] } else { [0, 1] };
    for colour in colours {
        for j in 0..n {
            let start = (colour + j) % 2;
            let mut i = start;
            while i < n {
                let k = j * n + i;
                let mut s = 0.0;
                if i > 0 {
                    s += e[k - 1];
                }
                if i + 1 < n {
                    s += e[k + 1];
                }
                if j > 0 {
                    s += e[k - n];
                }
                if j + 1 < n {
                    s += e[k + n];
                }
                e[k] = (b[k] + s * inv_h2) / (4.0 * inv_h2 + diag[k]);
                i += 2;
            }
        }
    }
}

/// Full weighting; coarse node `(I, J)` sits on fine node `(2I + 1, 2J + 1)`.
fn restrict(nf: usize, fine: &[f64], nc: usize, coarse: &mut [f64]) {
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nf as isize || j >= nf as isize {
            0.0
        } else {
            fine[j as usize * nf + i as usize]
        }
    };
    for jc in 0..nc {
        for ic in 0..nc {
            let (i, j) = ((2 * ic + 1) as isize, (2 * jc + 1) as isize);
            let v = 4.0 * at(i, j)
                + 2.0 * (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1))
                + at(i - 1, j - 1)
                + at(i + 1, j - 1)
                + at(i - 1, j + 1)
                + at(i + 1, j + 1);
            coarse[jc * nc + ic] = v / 16.0;
        }
    }
}

/// Bilinear interpolation of the coarse correction, added onto `fine`.
fn prolong_add(nc: usize, coarse: &[f64], nf: usize, fine: &mut [f64]) {
    let at = |ic: isize, jc: isize| -> f64 {
        if ic < 0 || jc < 0 || ic >= nc as isize || jc >= nc as isize {
            0.0
        } else {
            coarse[jc as usize * nc + ic as usize]
        }
    };
    for j in 0..nf {
        for i in 0..nf {
            // fine index i corresponds to coarse coordinate (i - 1) / 2
            let (ii, jj) = (i as isize - 1, j as isize - 1);
            let (ci, fi) = (ii.div_euclid(2), ii.rem_euclid(2));
            let (cj, fj) = (jj.div_euclid(2), jj.rem_euclid(2));
            let v = match (fi, fj) {
                (0, 0) => at(ci, cj),
                (1, 0) => 0.5 * (at(ci, cj) + at(ci + 1, cj)),
                (0, 1) => 0.5 * (at(ci, cj) + at(ci, cj + 1)),
                _ => 0.25 * (at(ci, cj) + at(ci + 1, cj) + at(ci, cj + 1) + at(ci + 1, cj + 1)),
            };
            fine[j * nf + i] += v;
        }
    }
}
