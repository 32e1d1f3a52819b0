//! Finite-difference laboratory for the Dirichlet problem
//! `-Δu = f(x, u) + μ` on a rectangle, where `μ` is a bounded signed measure
//! made of a density part and finitely many point masses.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core: grids and discrete norms, the measure model, mollification, the
//! discrete Green operator, a monotone Newton solver for the semilinear
//! problem, and the two limit schemes (truncation of `f` and mollification of
//! `μ`) used to compute reduced measures and the metric projection onto good
//! measures. File formats, configuration and the command-line runner live in
//! the `mplab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod extrapolate;
pub mod green;
pub mod grid;
pub mod linalg;
mod math;
pub mod measure;
pub mod mollify;
pub mod nonlinearity;
pub mod reduction;
pub mod semilinear;

pub use error::{Error, Result};
pub use grid::{Bounds, Grid, GridFunction, Norms, Point};
pub use measure::{Atom, Measure};
pub use mollify::{MollifierKernel, Profile};
pub use nonlinearity::Nonlinearity;
pub use reduction::{ReductionResult, Scheme};
pub use semilinear::{SolveOptions, SolveReport};
