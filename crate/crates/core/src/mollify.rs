//! Mollifiers `ρ_n(x) = c n² j(n|x|)` and the regularization `μ ↦ ρ_n ∗ μ`.
//!
//! Weights are sampled on a square stencil of radius `⌈1/(n h)⌉` nodes and
//! renormalized so that `h² Σ w = 1` exactly; the continuum constant
//! `c = 1 / ∫₀¹ j(r) 2πr dr` is computed by quadrature and reported beside the
//! effective discrete constant. Near the boundary the kernel is truncated
//! without renormalization.

use alloc::vec;
use alloc::vec::Vec;

use crate::green::green_apply;
use crate::grid::{Grid, GridFunction};
use crate::math;
use crate::measure::Measure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// `exp(-1/(1 - r²))`.
    #[default]
    Bump,
    /// `(1 + cos πr) / 2`.
    Cosine,
}

impl Profile {
    pub fn eval(self, r: f64) -> f64 {
        if !(r < 1.0) {
            return 0.0;
        }
        match self {
            Profile::Bump => math::exp(-1.0 / (1.0 - r * r)),
            Profile::Cosine => 0.5 * (1.0 + math::cos(core::f64::consts::PI * r)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Bump => "bump",
            Profile::Cosine => "cosine",
        }
    }

    /// `1 / ∫₀¹ j(r) α₂(r) dr` by composite Simpson.
    pub fn continuum_constant(self) -> f64 {
        let m = 4096;
        let step = 1.0 / m as f64;
        let g = |r: f64| self.eval(r) * sphere_factor(2, r);
        let mut s = g(0.0) + g(1.0);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g(k as f64 * step);
        }
        1.0 / (s * step / 3.0)
    }
}

/// `α_d(r) = 2 π^{d/2} r^{d-1} / Γ(d/2)`, the area of the sphere of radius `r`.
pub fn sphere_factor(d: u32, r: f64) -> f64 {
    let pi = core::f64::consts::PI;
    // Γ(d/2) from Γ(1) = 1 and Γ(1/2) = √π
    let mut gamma = if d % 2 == 0 { 1.0 } else { math::sqrt(pi) };
    let mut s = if d % 2 == 0 { 1.0 } else { 0.5 };
    while s + 0.5 < d as f64 / 2.0 {
        gamma *= s;
        s += 1.0;
    }
    2.0 * math::powf(pi, d as f64 / 2.0) * math::powf(r, d as f64 - 1.0) / gamma
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    /// Smoothing index; the support radius is `1/index`.
    pub index: f64,
    pub profile: Profile,
    /// Stencil half-width in nodes.
    pub radius_nodes: usize,
    /// `(2 r + 1)²` weights, row-major by offset `(di, dj)` from `(-r, -r)`.
    pub weights: Vec<f64>,
    pub h: f64,
    /// Quadrature value of the continuum normalization.
    pub c_continuum: f64,
    /// Constant actually used after discrete renormalization.
    pub c_discrete: f64,
}

impl MollifierKernel {
    pub fn radius(&self) -> f64 {
        1.0 / self.index
    }

    #[inline]
    pub fn weight(&self, di: isize, dj: isize) -> f64 {
        let r = self.radius_nodes as isize;
        let w = 2 * r + 1;
        self.weights[((dj + r) * w + (di + r)) as usize]
    }

    /// `h² Σ w`.
    pub fn mass(&self) -> f64 {
        self.h * self.h * self.weights.iter().sum::<f64>()
    }
}

pub fn build_kernel(index: f64, g: &Grid) -> Result<MollifierKernel> {
    build_kernel_with(index, Profile::default(), g)
}

pub fn build_kernel_with(index: f64, profile: Profile, g: &Grid) -> Result<MollifierKernel> {
    let h = g.h();
    let radius = 1.0 / index;
    if !(index > 0.0 && index.is_finite()) || radius < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::KernelTooNarrow { radius, h });
    }
    let r = math::ceil(radius / h - 1e-12) as usize;
    let w = 2 * r + 1;
    let c_continuum = profile.continuum_constant();
    let scale = c_continuum * index * index;
    let mut weights = vec![0.0; w * w];
    for dj in 0..w {
        for di in 0..w {
            let (x, y) = ((di as f64 - r as f64) * h, (dj as f64 - r as f64) * h);
            weights[dj * w + di] = scale * profile.eval(index * math::sqrt(x * x + y * y));
        }
    }
    let mass = h * h * weights.iter().sum::<f64>();
    weights.iter_mut().for_each(|v| *v /= mass);
    Ok(MollifierKernel {
        index,
        profile,
        radius_nodes: r,
        weights,
        h,
        c_continuum,
        c_discrete: c_continuum / mass,
    })
}

/// `ρ ∗ μ` as a pure density: discrete convolution of the nodal right-hand
/// side with the kernel, truncated at the boundary.
pub fn mollify_measure(m: &Measure, k: &MollifierKernel, g: &Grid) -> Result<Measure> {
    g.check_same(m.grid())?;
    if (k.h - g.h()).abs() > 1e-15 * g.h() {
        return Err(Error::GridMismatch);
    }
    let src = m.discretize();
    Ok(Measure::from_density(convolve(&src, k)))
}

/// `h² Σ_q w(p - q) v(q)` at every node `p`, zero outside the grid.
pub fn convolve(v: &GridFunction, k: &MollifierKernel) -> GridFunction {
    let g = *v.grid();
    let n = g.n() as isize;
    let r = k.radius_nodes as isize;
    let h2 = g.h() * g.h();
    let mut out = vec![0.0; g.len()];
    for (q, &s) in v.values().iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let (qi, qj) = g.ij(q);
        let (qi, qj) = (qi as isize, qj as isize);
        let s = s * h2;
        for dj in -r..=r {
            let j = qj + dj;
            if j < 0 || j >= n {
                continue;
            }
            for di in -r..=r {
                let i = qi + di;
                if i < 0 || i >= n {
                    continue;
                }
                out[(j * n + i) as usize] += s * k.weight(di, dj);
            }
        }
    }
    GridFunction::from_values(g, out).expect("finite by construction")
}

/// `h² Σ_y u(y) ρ(x - y)` at the single node `(i, j)`; the whole stencil must
/// lie inside the grid.
pub fn mollified_value(u: &GridFunction, node: (usize, usize), k: &MollifierKernel) -> Result<f64> {
    let g = u.grid();
    let (i, j) = node;
    let dist = g.node_dist_to_boundary(i, j);
    let r = k.radius_nodes;
    if i < r || j < r || i + r >= g.n() || j + r >= g.n() || dist < k.radius() {
        return Err(Error::TooCloseToBoundary {
            distance: dist,
            radius: k.radius(),
        });
    }
    let h2 = g.h() * g.h();
    let mut s = 0.0;
    let r = r as isize;
    for dj in -r..=r {
        for di in -r..=r {
            let w = k.weight(di, dj);
            if w != 0.0 {
                s += w * u.get((i as isize + di) as usize, (j as isize + dj) as usize);
            }
        }
    }
    Ok(h2 * s)
}

/// The pair `(ρ_n ∗ u(x), ρ_{n+1} ∗ u(x))`. For discretely superharmonic `u`
/// the expected ordering is `v_n ≤ v_{n+1} ≤ u(x)` up to an `O(h²)` slack.
pub fn check_superharmonic_monotonicity(
    u: &GridFunction,
    node: (usize, usize),
    index: f64,
    profile: Profile,
) -> Result<(f64, f64)> {
    let g = u.grid();
    let k0 = build_kernel_with(index, profile, g)?;
    let k1 = build_kernel_with(index + 1.0, profile, g)?;
    Ok((mollified_value(u, node, &k0)?, mollified_value(u, node, &k1)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenDomination {
    /// `max_x G_h(ρ ∗ μ)(x) / G_h μ(x)`.
    pub c_est: f64,
    pub holds: bool,
}

pub const GREEN_DOMINATION_TOL: f64 = 5e-2;

/// Measures `G_h(ρ_n ∗ μ) ≤ c G_h μ` for a nonnegative `μ` supported at least
/// `1/n` away from the boundary.
pub fn check_green_domination(m: &Measure, index: f64, profile: Profile) -> Result<GreenDomination> {
    if !m.is_nonnegative() {
        return Err(Error::NotPositive);
    }
    let g = *m.grid();
    let k = build_kernel_with(index, profile, &g)?;
    let Some(dist) = m.support_dist() else {
        return Ok(GreenDomination {
            c_est: 0.0,
            holds: true,
        });
    };
    if dist < k.radius() {
        return Err(Error::TooCloseToBoundary {
            distance: dist,
            radius: k.radius(),
        });
    }
    let base = green_apply(m, &g)?;
    let smooth = green_apply(&mollify_measure(m, &k, &g)?, &g)?;
    let c_est = base
        .values()
        .iter()
        .zip(smooth.values())
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, s)| s / b)
        .fold(0.0, f64::max);
    Ok(GreenDomination {
        c_est,
        holds: c_est <= 1.0 + GREEN_DOMINATION_TOL,
    })
}

/// Default mollification schedule: `n_k = n₀ 2^k` with `1/n₀` a quarter of the
/// distance from the atoms to the boundary (`1/8` without atoms), continued
/// while `1/n_k ≥ 2h`.
pub fn default_schedule(m: &Measure) -> Vec<f64> {
    let h = m.grid().h();
    let r0 = m.singular_support_dist().map_or(0.125, |d| 0.25 * d);
    let mut out = Vec::new();
    let mut idx = 1.0 / r0;
    while 1.0 / idx >= 2.0 * h * (1.0 - 1e-12) {
        out.push(idx);
        idx *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Point;
    use core::f64::consts::PI;

    #[test]
    fn two_dimensional_sphere_factor() {
        for &r in &[0.1, 0.5, 1.0] {
            assert!((sphere_factor(2, r) - 2.0 * PI * r).abs() < 1e-14);
        }
        assert!((sphere_factor(3, 1.0) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_factor(1, 0.3) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unit_mass_and_scaling() {
        let g = Grid::unit_square(127).unwrap();
        for &idx in &[2.0, 5.0, 8.0, 16.0, 33.0, 64.0] {
            let k = build_kernel(idx, &g).unwrap();
            assert!((k.mass() - 1.0).abs() < 1e-12);
            assert!(k.weights.iter().all(|&w| w >= 0.0));
        }
        let a = build_kernel(8.0, &g).unwrap();
        let b = build_kernel(16.0, &g).unwrap();
        assert_eq!(a.radius_nodes, 16);
        assert_eq!(b.radius_nodes, 8);
        assert!(matches!(build_kernel(65.0, &g), Err(Error::KernelTooNarrow { .. })));
    }

    #[test]
    fn discrete_constant_close_to_continuum() {
        let g = Grid::unit_square(255).unwrap();
        let k = build_kernel(8.0, &g).unwrap();
        assert!((k.c_discrete / k.c_continuum - 1.0).abs() < 1e-3);
        let k = build_kernel_with(8.0, Profile::Cosine, &g).unwrap();
        // (1 + cos πr)/2 integrates to π/2 - 2/π against 2πr
        let exact = 1.0 / (PI / 2.0 - 2.0 / PI);
        assert!((k.c_continuum / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn center_atom_mass_is_preserved() {
        let g = Grid::unit_square(63).unwrap();
        let m = Measure::dirac(g, Point::new(0.5, 0.5), 1.0).unwrap();
        let k = build_kernel(10.0, &g).unwrap();
        let r = mollify_measure(&m, &k, &g).unwrap();
        assert!((r.total_mass() - 1.0).abs() < 1e-12);
        assert!(r.support_dist().unwrap() >= 0.5 - 0.1 - 1e-12);
    }

    #[test]
    fn constants_are_reproduced() {
        let g = Grid::unit_square(63).unwrap();
        let u = GridFunction::constant(g, 1.0);
        let (a, b) = check_superharmonic_monotonicity(&u, g.center_node(), 5.0, Profile::Bump).unwrap();
        assert!((a - 1.0).abs() < 1e-13 && (b - 1.0).abs() < 1e-13);
        assert!(matches!(
            check_superharmonic_monotonicity(&u, (2, 30), 5.0, Profile::Bump),
            Err(Error::TooCloseToBoundary { .. })
        ));
    }

    #[test]
    fn subharmonic_reverses_the_chain() {
        let g = Grid::unit_square(63).unwrap();
        let c = g.bounds().center();
        let u = GridFunction::from_fn(g, |p| -((p.x - c.x).powi(2) + (p.y - c.y).powi(2))).unwrap();
        // -|x|² is superharmonic: averages lie below the centre value
        let (a, b) = check_superharmonic_monotonicity(&u, g.center_node(), 4.0, Profile::Bump).unwrap();
        assert!(a < b && b < 0.0);
        let w = u.scale(-1.0);
        let (a, b) = check_superharmonic_monotonicity(&w, g.center_node(), 4.0, Profile::Bump).unwrap();
        assert!(a > b && b > 0.0);
    }

    #[test]
    fn default_schedule_for_center_atom() {
        let g = Grid::unit_square(127).unwrap();
        let m = Measure::dirac(g, g.bounds().center(), 1.0).unwrap();
        assert_eq!(default_schedule(&m), vec![8.0, 16.0, 32.0, 64.0]);
    }

    #[test]
    fn zero_measure_domination_convention() {
        let g = Grid::unit_square(31).unwrap();
        let d = check_green_domination(&Measure::zero(g), 10.0, Profile::Bump).unwrap();
        assert!(d.holds);
        let neg = Measure::dirac(g, g.bounds().center(), -1.0).unwrap();
        assert!(matches!(
            check_green_domination(&neg, 10.0, Profile::Bump),
            Err(Error::NotPositive)
        ));
    }
}
