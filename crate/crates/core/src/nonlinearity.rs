//! Absorption terms `f(x, y)`, non-increasing in `y`, and their derived forms.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{Grid, GridFunction, Point};
use crate::math;
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    /// `-coef · y`.
    Linear { coef: f64 },
    /// `-(y⁺)^p`.
    Power { p: f64 },
    /// `-|y|^{p-1} y`.
    OddPower { p: f64 },
    /// `-(e^{a y} - 1)⁺`.
    Exp { a: f64 },
    /// `-(e^{a y} - 1)`.
    ExpFull { a: f64 },
    /// `f(x, y) + c`.
    Shifted(Box<Nonlinearity>, f64),
    Sum(Box<Nonlinearity>, Box<Nonlinearity>),
    /// `f ∨ (-level)`.
    Truncated(Box<Nonlinearity>, f64),
    /// `-f(x, -y)`.
    Reflected(Box<Nonlinearity>),
    /// `f⁺ = max(f, 0)`.
    PositivePart(Box<Nonlinearity>),
    /// `-f⁻ = min(f, 0)`.
    NegativePart(Box<Nonlinearity>),
    Custom {
        label: String,
        f: ScalarFn,
        /// `∂_y f`; central differences are used when absent.
        df: Option<ScalarFn>,
    },
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => write!(f, "0"),
            Nonlinearity::Linear { coef } => write!(f, "-{coef}*y"),
            Nonlinearity::Power { p } => write!(f, "-(y+)^{p}"),
            Nonlinearity::OddPower { p } => write!(f, "-|y|^{}*y", p - 1.0),
            Nonlinearity::Exp { a } => write!(f, "-(exp({a}y)-1)+"),
            Nonlinearity::ExpFull { a } => write!(f, "-(exp({a}y)-1)"),
            Nonlinearity::Shifted(g, c) => write!(f, "({g:?})+{c}"),
            Nonlinearity::Sum(a, b) => write!(f, "({a:?})+({b:?})"),
            Nonlinearity::Truncated(g, l) => write!(f, "max({g:?},-{l})"),
            Nonlinearity::Reflected(g) => write!(f, "reflect({g:?})"),
            Nonlinearity::PositivePart(g) => write!(f, "pos({g:?})"),
            Nonlinearity::NegativePart(g) => write!(f, "neg({g:?})"),
            Nonlinearity::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

fn fd_step(y: f64) -> f64 {
    1e-6f64.max(1e-6 * y.abs())
}

impl Nonlinearity {
    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Nonlinearity::Custom {
            label: label.into(),
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn eval(&self, x: Point, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { coef } => -coef * y,
            Nonlinearity::Power { p } => {
                if y > 0.0 {
                    -math::powf(y, *p)
                } else {
                    0.0
                }
            }
            Nonlinearity::OddPower { p } => {
                let m = math::powf(y.abs(), *p);
                if y < 0.0 {
                    m
                } else {
                    -m
                }
            }
            Nonlinearity::Exp { a } => -math::expm1(a * y).max(0.0),
            Nonlinearity::ExpFull { a } => -math::expm1(a * y),
            Nonlinearity::Shifted(g, c) => g.eval(x, y) + c,
            Nonlinearity::Sum(a, b) => a.eval(x, y) + b.eval(x, y),
            Nonlinearity::Truncated(g, l) => g.eval(x, y).max(-l),
            Nonlinearity::Reflected(g) => -g.eval(x, -y),
            Nonlinearity::PositivePart(g) => g.eval(x, y).max(0.0),
            Nonlinearity::NegativePart(g) => g.eval(x, y).min(0.0),
            Nonlinearity::Custom { f, .. } => f(x, y),
        }
    }

    /// `∂_y f(x, y)`; one-sided choices at kinks follow the branch taken by
    /// [`eval`](Self::eval).
    pub fn deriv(&self, x: Point, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { coef } => -coef,
            Nonlinearity::Power { p } => {
                if y > 0.0 {
                    -p * math::powf(y, p - 1.0)
                } else {
                    0.0
                }
            }
            Nonlinearity::OddPower { p } => -p * math::powf(y.abs(), p - 1.0),
            Nonlinearity::Exp { a } => {
                if a * y > 0.0 {
                    -a * math::exp(a * y)
                } else {
                    0.0
                }
            }
            Nonlinearity::ExpFull { a } => -a * math::exp(a * y),
            Nonlinearity::Shifted(g, _) => g.deriv(x, y),
            Nonlinearity::Sum(a, b) => a.deriv(x, y) + b.deriv(x, y),
            Nonlinearity::Truncated(g, l) => {
                if g.eval(x, y) > -l {
                    g.deriv(x, y)
                } else {
                    0.0
                }
            }
            Nonlinearity::Reflected(g) => g.deriv(x, -y),
            Nonlinearity::PositivePart(g) => {
                if g.eval(x, y) > 0.0 {
                    g.deriv(x, y)
                } else {
                    0.0
                }
            }
            Nonlinearity::NegativePart(g) => {
                if g.eval(x, y) < 0.0 {
                    g.deriv(x, y)
                } else {
                    0.0
                }
            }
            Nonlinearity::Custom { f, df, .. } => match df {
                Some(d) => d(x, y),
                None => {
                    let s = fd_step(y);
                    (f(x, y + s) - f(x, y - s)) / (2.0 * s)
                }
            },
        }
    }

    /// `f ∨ (-level)`.
    pub fn truncate(&self, level: f64) -> Self {
        Nonlinearity::Truncated(Box::new(self.clone()), level)
    }

    /// `f̃(x, y) = -f(x, -y)`; a double reflection returns the original.
    pub fn reflect(&self) -> Self {
        match self {
            Nonlinearity::Reflected(g) => (**g).clone(),
            g => Nonlinearity::Reflected(Box::new(g.clone())),
        }
    }

    pub fn positive_part(&self) -> Self {
        Nonlinearity::PositivePart(Box::new(self.clone()))
    }

    /// `-f⁻`.
    pub fn negative_part(&self) -> Self {
        Nonlinearity::NegativePart(Box::new(self.clone()))
    }

    pub fn shifted(&self, c: f64) -> Self {
        Nonlinearity::Shifted(Box::new(self.clone()), c)
    }

    pub fn plus(&self, other: &Nonlinearity) -> Self {
        Nonlinearity::Sum(Box::new(self.clone()), Box::new(other.clone()))
    }

    /// `f(·, u(·))` as a grid function; fails if any value is not finite.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.map(|p, v| self.eval(p, v))
    }

    /// `f(·, 0)`.
    pub fn at_zero(&self, grid: Grid) -> Result<GridFunction> {
        GridFunction::from_fn(grid, |p| self.eval(p, 0.0))
    }

    /// Samples `f` at every node of `grid` against [`y_lattice`] and reports
    /// the first pair `y₁ < y₂` with `f(x, y₁) < f(x, y₂)` beyond rounding.
    pub fn certify_monotone(&self, grid: &Grid) -> Result<()> {
        let ys = y_lattice();
        for k in 0..grid.len() {
            let x = grid.node_at(k);
            let mut prev = self.eval(x, ys[0]);
            for w in ys.windows(2) {
                let next = self.eval(x, w[1]);
                if next.is_nan() || prev.is_nan() {
                    return Err(Error::NonFinite("nonlinearity sample"));
                }
                let slack = 1e-12 * (1.0 + prev.abs().min(next.abs()));
                if next > prev + slack {
                    return Err(Error::MonotonicityViolation {
                        x: x.x,
                        y: x.y,
                        u_low: w[0],
                        u_high: w[1],
                    });
                }
                prev = next;
            }
        }
        Ok(())
    }

    /// Condition (B), `f(x, y) = 0` for `y <= 0`, checked on the sample lattice.
    pub fn condition_b(&self, grid: &Grid) -> bool {
        let ys = y_lattice();
        (0..grid.len()).all(|k| {
            let x = grid.node_at(k);
            ys.iter().filter(|&&y| y <= 0.0).all(|&y| self.eval(x, y) == 0.0)
        })
    }

    /// `self <= other` at every lattice sample.
    pub fn le_on_samples(&self, other: &Nonlinearity, grid: &Grid) -> bool {
        let ys = y_lattice();
        (0..grid.len()).all(|k| {
            let x = grid.node_at(k);
            ys.iter().all(|&y| {
                let (a, b) = (self.eval(x, y), other.eval(x, y));
                a <= b + 1e-12 * (1.0 + b.abs()) || (a.is_infinite() && a == b)
            })
        })
    }
}

/// `0` and `±10^{k/4}` for `k = -24..=24`, increasing.
pub fn y_lattice() -> Vec<f64> {
    let mut pos: Vec<f64> = (-24..=24).map(|k| math::powf(10.0, k as f64 / 4.0)).collect();
    let mut ys: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    ys.push(0.0);
    ys.append(&mut pos);
    ys
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const X: Point = Point::new(0.3, 0.6);

    fn families() -> Vec<Nonlinearity> {
        vec![
            Nonlinearity::Zero,
            Nonlinearity::Linear { coef: 2.0 },
            Nonlinearity::Power { p: 3.0 },
            Nonlinearity::OddPower { p: 2.0 },
            Nonlinearity::Exp { a: 2.0 },
            Nonlinearity::ExpFull { a: 1.0 },
            Nonlinearity::Exp { a: 1.0 }.shifted(1.5).truncate(4.0),
            Nonlinearity::ExpFull { a: 1.0 }.positive_part(),
            Nonlinearity::ExpFull { a: 1.0 }.negative_part().reflect(),
        ]
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for f in families() {
            for &y in &[-1.7, -0.2, 0.3, 0.9, 2.5] {
                let s = 1e-6;
                let fd = (f.eval(X, y + s) - f.eval(X, y - s)) / (2.0 * s);
                let d = f.deriv(X, y);
                assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "{f:?} at {y}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn families_certify() {
        let g = Grid::unit_square(7).unwrap();
        for f in families() {
            f.certify_monotone(&g).unwrap();
        }
    }

    #[test]
    fn increasing_custom_is_rejected() {
        let g = Grid::unit_square(5).unwrap();
        let f = Nonlinearity::custom("y", |_, y| y);
        assert!(matches!(
            f.certify_monotone(&g),
            Err(Error::MonotonicityViolation { .. })
        ));
    }

    #[test]
    fn condition_b_flags() {
        let g = Grid::unit_square(5).unwrap();
        assert!(Nonlinearity::Exp { a: 2.0 }.condition_b(&g));
        assert!(Nonlinearity::Power { p: 3.0 }.condition_b(&g));
        assert!(!Nonlinearity::Linear { coef: 1.0 }.condition_b(&g));
    }

    #[test]
    fn reflected_exp_is_inert_on_positive_values() {
        let r = Nonlinearity::Exp { a: 2.0 }.reflect();
        assert_eq!(r.eval(X, 3.0), 0.0);
        assert!((r.eval(X, -1.0) - (math::exp(2.0) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn custom_uses_central_differences() {
        let f = Nonlinearity::custom("-y^3", |_, y| -y * y * y);
        assert!((f.deriv(X, 2.0) + 12.0).abs() < 1e-6);
    }
}
