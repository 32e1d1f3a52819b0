//! Signed bounded measures as a nodal density plus finitely many atoms.
//!
//! The density is a mass per unit area sampled at the interior nodes of a
//! grid; atoms are point masses strictly inside the domain. Points have zero
//! capacity in two dimensions, so the density is the diffuse part and the atom
//! list is the concentrated part.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, GridFunction, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub mass: f64,
}

impl Atom {
    pub const fn new(x: f64, y: f64, mass: f64) -> Self {
        Self {
            point: Point::new(x, y),
            mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    density: GridFunction,
    atoms: Vec<Atom>,
}

impl Measure {
    /// Validates that atoms are finite, strictly interior and pairwise
    /// distinct. Zero-mass atoms are dropped.
    pub fn new(density: GridFunction, atoms: Vec<Atom>) -> Result<Self> {
        let bounds = density.grid().bounds();
        let mut kept: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !(a.point.x.is_finite() && a.point.y.is_finite() && a.mass.is_finite()) {
                return Err(Error::NonFinite("atom"));
            }
            if !bounds.contains(a.point) {
                return Err(Error::AtomOutsideDomain {
                    x: a.point.x,
                    y: a.point.y,
                });
            }
            if kept.iter().any(|b| b.point == a.point) {
                return Err(Error::DuplicateAtom {
                    x: a.point.x,
                    y: a.point.y,
                });
            }
            kept.push(a);
        }
        kept.retain(|a| a.mass != 0.0);
        Ok(Self {
            density,
            atoms: kept,
        })
    }

    pub fn zero(grid: Grid) -> Self {
        Self {
            density: GridFunction::zeros(grid),
            atoms: Vec::new(),
        }
    }

    pub fn from_density(density: GridFunction) -> Self {
        Self {
            density,
            atoms: Vec::new(),
        }
    }

    pub fn dirac(grid: Grid, point: Point, mass: f64) -> Result<Self> {
        Self::new(GridFunction::zeros(grid), vec![Atom { point, mass }])
    }

    pub fn atoms_only(grid: Grid, atoms: Vec<Atom>) -> Result<Self> {
        Self::new(GridFunction::zeros(grid), atoms)
    }

    pub fn grid(&self) -> &Grid {
        self.density.grid()
    }

    pub fn density(&self) -> &GridFunction {
        &self.density
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.values().iter().all(|&v| v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.mass >= 0.0) && self.density.values().iter().all(|&v| v >= 0.0)
    }

    /// `(μ⁺, μ⁻)` by the pointwise split of density values and atom masses.
    pub fn jordan_decompose(&self) -> (Measure, Measure) {
        let grid = *self.grid();
        let split = |sign: f64| Measure {
            density: GridFunction::from_values(
                grid,
                self.density.values().iter().map(|&v| (sign * v).max(0.0)).collect(),
            )
            .expect("finite by construction"),
            atoms: self
                .atoms
                .iter()
                .filter(|a| sign * a.mass > 0.0)
                .map(|a| Atom {
                    point: a.point,
                    mass: sign * a.mass,
                })
                .collect(),
        };
        (split(1.0), split(-1.0))
    }

    /// `(μ_d, μ_c)`: the density part and the atom part.
    pub fn split_diffuse_concentrated(&self) -> (Measure, Measure) {
        (
            Measure::from_density(self.density.clone()),
            Measure {
                density: GridFunction::zeros(*self.grid()),
                atoms: self.atoms.clone(),
            },
        )
    }

    /// `|μ|(D) = h² Σ |density| + Σ |mass|`.
    pub fn total_variation(&self) -> f64 {
        self.density.l1_norm() + self.atoms.iter().map(|a| a.mass.abs()).sum::<f64>()
    }

    /// `μ(D)`.
    pub fn total_mass(&self) -> f64 {
        self.density.integral() + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Nodal right-hand side: density values plus `mass / h²` at the nearest
    /// node of each atom.
    pub fn discretize(&self) -> GridFunction {
        let grid = *self.grid();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let mut v = self.density.values().to_vec();
        for a in &self.atoms {
            let (i, j) = grid.nearest_node(a.point).expect("atoms validated");
            v[grid.idx(i, j)] += a.mass * inv_h2;
        }
        GridFunction::from_values(grid, v).expect("finite by construction")
    }

    /// Linear indices of the nodes hosting the atoms, in atom order.
    pub fn atom_nodes(&self) -> Vec<usize> {
        let grid = self.grid();
        self.atoms
            .iter()
            .map(|a| {
                let (i, j) = grid.nearest_node(a.point).expect("atoms validated");
                grid.idx(i, j)
            })
            .collect()
    }

    /// Distance from the singular support (the atoms) to the boundary, or
    /// `None` when there are no atoms.
    pub fn singular_support_dist(&self) -> Option<f64> {
        let b = self.grid().bounds();
        self.atoms
            .iter()
            .map(|a| b.dist_to_boundary(a.point))
            .reduce(f64::min)
    }

    /// Distance from the whole support (atoms and nonzero density nodes) to
    /// the boundary; `None` for the zero measure.
    pub fn support_dist(&self) -> Option<f64> {
        let grid = self.grid();
        let dens = self
            .density
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, _)| {
                let (i, j) = grid.ij(k);
                grid.node_dist_to_boundary(i, j)
            })
            .reduce(f64::min);
        match (dens, self.singular_support_dist()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// `a μ`.
    pub fn scale(&self, c: f64) -> Measure {
        Measure {
            density: self.density.scale(c),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point,
                    mass: c * a.mass,
                })
                .filter(|a| a.mass != 0.0)
                .collect(),
        }
    }

    /// Sum; atoms at the same point merge, cancelling atoms vanish.
    pub fn add(&self, other: &Measure) -> Result<Measure> {
        let density = self.density.add(&other.density)?;
        let mut atoms = self.atoms.clone();
        for b in &other.atoms {
            match atoms.iter_mut().find(|a| a.point == b.point) {
                Some(a) => a.mass += b.mass,
                None => atoms.push(*b),
            }
        }
        atoms.retain(|a| a.mass != 0.0);
        Ok(Measure { density, atoms })
    }

    pub fn sub(&self, other: &Measure) -> Result<Measure> {
        self.add(&other.scale(-1.0))
    }

    /// `‖self - other‖_υ`.
    pub fn tv_distance(&self, other: &Measure) -> Result<f64> {
        Ok(self.sub(other)?.total_variation())
    }

    /// Order test `self ≤ other + tol` on the discretized right-hand sides,
    /// node by node (atoms contribute `mass / h²` at their nodes). `tol` is a
    /// mass, so it is divided by `h²` for the nodal comparison.
    pub fn le(&self, other: &Measure, tol: f64) -> Result<bool> {
        self.grid().check_same(other.grid())?;
        let h2 = self.grid().h() * self.grid().h();
        let a = self.discretize();
        let b = other.discretize();
        Ok(a.values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x <= &(y + tol / h2)))
    }

    /// Disjoint density supports, disjoint atom sets, and no atom of one
    /// measure inside the density support of the other.
    pub fn mutually_singular(&self, other: &Measure) -> Result<bool> {
        self.grid().check_same(other.grid())?;
        let a = self.density.values();
        let b = other.density.values();
        if a.iter().zip(b).any(|(x, y)| *x != 0.0 && *y != 0.0) {
            return Ok(false);
        }
        if self
            .atoms
            .iter()
            .any(|p| other.atoms.iter().any(|q| q.point == p.point))
        {
            return Ok(false);
        }
        let hits = |atoms_of: &Measure, dens: &[f64]| {
            atoms_of.atom_nodes().iter().any(|&k| dens[k] != 0.0)
        };
        Ok(!hits(self, b) && !hits(other, a))
    }
}

/// Nodal right-hand side of `m` on `g`.
pub fn discretize_rhs(m: &Measure, g: &Grid) -> Result<GridFunction> {
    g.check_same(m.grid())?;
    Ok(m.discretize())
}
