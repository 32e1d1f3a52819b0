//! Uniform square-cell grids on a rectangle, grid functions, the 5-point
//! negative Laplacian and the discrete norms.
//!
//! Only interior nodes are stored. Node `(i, j)` with `0 <= i, j < n` sits at
//! `(x_min + (i + 1) h, y_min + (j + 1) h)`; the boundary ring carries the
//! homogeneous Dirichlet value 0. Values are stored row-major by `y`:
//! `values[j * n + i]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        math::sqrt(dx * dx + dy * dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const UNIT_SQUARE: Bounds = Bounds {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }

    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        (p.x - self.x_min)
            .min(self.x_max - p.x)
            .min(p.y - self.y_min)
            .min(self.y_max - p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    bounds: Bounds,
    n: usize,
    h: f64,
}

impl Grid {
    /// Builds an `n x n` interior grid; cells must be square and `n >= 3`.
    pub fn new(bounds: Bounds, n: usize) -> Result<Self> {
        let Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        } = bounds;
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("grid bounds"));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3, got {n}")));
        }
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidGrid(format!(
                "degenerate bounds [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        let wx = x_max - x_min;
        let wy = y_max - y_min;
        if (wx - wy).abs() > 1e-12 * wx.max(wy) {
            return Err(Error::InvalidGrid(format!(
                "cells are not square: width {wx} vs height {wy}"
            )));
        }
        Ok(Self {
            bounds,
            n,
            h: wx / (n + 1) as f64,
        })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(Bounds::UNIT_SQUARE, n)
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.bounds.x_min + (i + 1) as f64 * self.h,
            self.bounds.y_min + (j + 1) as f64 * self.h,
        )
    }

    pub fn node_at(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        self.node(i, j)
    }

    /// Index of the interior node nearest to `p`; ties go to the lower index.
    pub fn nearest_node(&self, p: Point) -> Result<(usize, usize)> {
        if !self.bounds.contains(p) {
            return Err(Error::AtomOutsideDomain { x: p.x, y: p.y });
        }
        let pick = |t: f64| -> usize {
            // t is the coordinate in units of h measured from the boundary node 0.
            let k = math::ceil(t - 0.5).max(1.0).min(self.n as f64);
            k as usize - 1
        };
        Ok((
            pick((p.x - self.bounds.x_min) / self.h),
            pick((p.y - self.bounds.y_min) / self.h),
        ))
    }

    /// Distance from interior node `(i, j)` to the boundary.
    pub fn node_dist_to_boundary(&self, i: usize, j: usize) -> f64 {
        let lo = i.min(j) + 1;
        let hi = self.n - i.max(j);
        lo.min(hi) as f64 * self.h
    }

    /// Node of the grid closest to the domain center (lower index on ties).
    pub fn center_node(&self) -> (usize, usize) {
        self.nearest_node(self.bounds.center())
            .unwrap_or((self.n / 2, self.n / 2))
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real values on the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

/// Discrete `L¹`, `L∞` and `W^{1,q}` norms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub linf: f64,
    pub w1q: f64,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.node_at(k))).collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, mut f: impl FnMut(Point, f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.node_at(k), v))
            .collect();
        Self::from_values(self.grid, values)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid, values)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `h² Σ v`, the quadrature of the field.
    pub fn integral(&self) -> f64 {
        let h = self.grid.h();
        h * h * self.values.iter().sum::<f64>()
    }

    pub fn l1_norm(&self) -> f64 {
        let h = self.grid.h();
        h * h * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(h² Σ |D⁺ₓu|^q + |D⁺ᵧu|^q + |u|^q)^{1/q}` with forward differences over
    /// every grid edge, including the edges touching the zero boundary ring.
    pub fn w1q_norm(&self, q: f64) -> Result<f64> {
        if !(1.0..2.0).contains(&q) {
            return Err(Error::InvalidExponent(q));
        }
        let n = self.grid.n();
        let h = self.grid.h();
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                0.0
            } else {
                self.values[j as usize * n + i as usize]
            }
        };
        let mut sum = 0.0;
        for j in 0..n as isize {
            for i in -1..n as isize {
                let dx = (at(i + 1, j) - at(i, j)) / h;
                let dy = (at(j, i + 1) - at(j, i)) / h;
                sum += math::powf(dx.abs(), q) + math::powf(dy.abs(), q);
            }
        }
        sum += self.values.iter().map(|v| math::powf(v.abs(), q)).sum::<f64>();
        Ok(math::powf(h * h * sum, 1.0 / q))
    }

    pub fn norms(&self, q: f64) -> Result<Norms> {
        Ok(Norms {
            l1: self.l1_norm(),
            linf: self.linf_norm(),
            w1q: self.w1q_norm(q)?,
        })
    }
}

/// `out = -Δ_h u` on raw interior values, boundary neighbours read as 0.
pub(crate) fn neg_laplacian_into(n: usize, h: f64, u: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (h * h);
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let mut s = 4.0 * u[k];
            if i > 0 {
                s -= u[k - 1];
            }
            if i + 1 < n {
                s -= u[k + 1];
            }
            if j > 0 {
                s -= u[k - n];
            }
            if j + 1 < n {
                s -= u[k + n];
            }
            out[k] = s * inv_h2;
        }
    }
}

/// The 5-point negative Laplacian `(-Δ_h u)_{ij} = (4u_{ij} - Σ neighbours) / h²`.
pub fn laplacian_apply(grid: &Grid, u: &GridFunction) -> Result<GridFunction> {
    grid.check_same(&u.grid)?;
    let mut out = vec![0.0; grid.len()];
    neg_laplacian_into(grid.n(), grid.h(), &u.values, &mut out);
    GridFunction::from_values(*grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn spacing_follows_node_count() {
        assert_eq!(Grid::unit_square(3).unwrap().h(), 0.25);
        assert_eq!(Grid::unit_square(127).unwrap().h(), 1.0 / 128.0);
    }

    #[test]
    fn rejects_bad_grids() {
        let flipped = Bounds {
            x_min: 1.0,
            x_max: 0.0,
            ..Bounds::UNIT_SQUARE
        };
        assert!(matches!(Grid::new(flipped, 7), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::unit_square(2), Err(Error::InvalidGrid(_))));
        let wide = Bounds {
            x_max: 2.0,
            ..Bounds::UNIT_SQUARE
        };
        assert!(matches!(Grid::new(wide, 7), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn nearest_node_breaks_ties_low() {
        let g = Grid::unit_square(3).unwrap();
        // x = 0.375 lies halfway between nodes 0 (0.25) and 1 (0.5).
        assert_eq!(g.nearest_node(Point::new(0.375, 0.5)).unwrap(), (0, 1));
        assert_eq!(g.nearest_node(Point::new(0.38, 0.5)).unwrap(), (1, 1));
        assert!(g.nearest_node(Point::new(1.0, 0.5)).is_err());
    }

    #[test]
    fn zero_field_has_zero_laplacian_and_norms() {
        let g = Grid::unit_square(9).unwrap();
        let u = GridFunction::zeros(g);
        assert!(laplacian_apply(&g, &u).unwrap().values().iter().all(|&v| v == 0.0));
        let norms = u.norms(1.5).unwrap();
        assert_eq!((norms.l1, norms.linf, norms.w1q), (0.0, 0.0, 0.0));
    }

    #[test]
    fn spike_stencil() {
        let g = Grid::unit_square(7).unwrap();
        let mut vals = vec![0.0; g.len()];
        vals[g.idx(3, 3)] = 1.0;
        let u = GridFunction::from_values(g, vals).unwrap();
        let lu = laplacian_apply(&g, &u).unwrap();
        let inv_h2 = 1.0 / (g.h() * g.h());
        assert_eq!(lu.get(3, 3), 4.0 * inv_h2);
        for (i, j) in [(2, 3), (4, 3), (3, 2), (3, 4)] {
            assert_eq!(lu.get(i, j), -inv_h2);
        }
        assert_eq!(lu.get(2, 2), 0.0);
    }

    #[test]
    fn eigenfunction_is_reproduced_to_second_order() {
        let g = Grid::unit_square(127).unwrap();
        let u = GridFunction::from_fn(g, |p| (PI * p.x).sin() * (PI * p.y).sin()).unwrap();
        let lu = laplacian_apply(&g, &u).unwrap();
        let target = u.scale(2.0 * PI * PI);
        let err = lu.sub(&target).unwrap().linf_norm() / target.linf_norm();
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn constant_l1_norm() {
        let g = Grid::unit_square(15).unwrap();
        let u = GridFunction::constant(g, 1.0);
        let h = g.h();
        assert!((u.l1_norm() - h * h * 225.0).abs() < 1e-15);
    }

    #[test]
    fn w1q_rejects_out_of_range_exponent() {
        let u = GridFunction::zeros(Grid::unit_square(5).unwrap());
        assert!(matches!(u.w1q_norm(2.0), Err(Error::InvalidExponent(_))));
        assert!(matches!(u.w1q_norm(0.5), Err(Error::InvalidExponent(_))));
    }

    /// Midpoint-rule oracle for ∫ |u_x| + |u_y| + |u| of sin(πx)sin(πy),
    /// evaluated with the analytic derivatives on a fine cell grid.
    fn w11_quadrature_oracle(m: usize) -> f64 {
        let h = 1.0 / m as f64;
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                let x = (a as f64 + 0.5) * h;
                let y = (b as f64 + 0.5) * h;
                let (sx, cx) = ((PI * x).sin(), (PI * x).cos());
                let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
                s += (PI * cx * sy).abs() + (PI * sx * cy).abs() + (sx * sy).abs();
            }
        }
        s * h * h
    }

    #[test]
    fn w11_norm_of_eigenfunction() {
        let exact = 8.0 / PI + 4.0 / (PI * PI);
        let oracle = w11_quadrature_oracle(2000);
        assert!((oracle - exact).abs() < 1e-5, "oracle {oracle} vs {exact}");
        let g = Grid::unit_square(255).unwrap();
        let u = GridFunction::from_fn(g, |p| (PI * p.x).sin() * (PI * p.y).sin()).unwrap();
        let w = u.w1q_norm(1.0).unwrap();
        assert!((w - oracle).abs() / oracle < 1e-3, "discrete {w} vs {oracle}");
    }
}
