//! Richardson-type extrapolation `a(h) = a₀ + C h^β` with the order `β`
//! unknown.
//!
//! For each `β` on a fine scan of the admissible interval the pair `(a₀, C)`
//! is the linear least-squares fit; the `β` with the smallest residual wins.
//! With three grids and `β` free the fit is usually exact; when the data ask
//! for an order outside the interval the endpoint is used and the residual
//! says so.

use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

pub const BETA_MIN: f64 = 0.3;
pub const BETA_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonFit {
    pub a0: f64,
    pub c: f64,
    pub beta: f64,
    /// Root-mean-square misfit of the model on the input points.
    pub residual: f64,
    pub hs: Vec<f64>,
    pub values: Vec<f64>,
}

impl RichardsonFit {
    /// `|a₀ - a(h_min)|`, a crude error bar.
    pub fn error_estimate(&self) -> f64 {
        let k = self
            .hs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        (self.a0 - self.values[k]).abs() + self.residual
    }
}

fn fit_fixed(hs: &[f64], values: &[f64], beta: f64) -> (f64, f64, f64) {
    let k = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|&h| math::powf(h, beta)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = values.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(values).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a0 = my - c * mx;
    let ss: f64 = xs
        .iter()
        .zip(values)
        .map(|(x, y)| {
            let e = a0 + c * x - y;
            e * e
        })
        .sum();
    (a0, c, math::sqrt(ss / k))
}

pub fn richardson(hs: &[f64], values: &[f64]) -> Result<RichardsonFit> {
    richardson_in(hs, values, BETA_MIN, BETA_MAX)
}

pub fn richardson_in(hs: &[f64], values: &[f64], beta_min: f64, beta_max: f64) -> Result<RichardsonFit> {
    if hs.len() != values.len() {
        return Err(Error::Precondition("one value per grid spacing".into()));
    }
    if hs.len() < 3 {
        return Err(Error::LadderTooShort {
            required: 3,
            got: hs.len(),
        });
    }
    if hs.iter().chain(values).any(|v| !v.is_finite()) || hs.iter().any(|&h| h <= 0.0) {
        return Err(Error::NonFinite("extrapolation input"));
    }
    let steps = 1700;
    let mut best = (f64::INFINITY, 0.0, 0.0, beta_min);
    for s in 0..=steps {
        let beta = beta_min + (beta_max - beta_min) * s as f64 / steps as f64;
        let (a0, c, r) = fit_fixed(hs, values, beta);
        if r < best.0 {
            best = (r, a0, c, beta);
        }
    }
    // refine around the best scan point by golden section
    let width = (beta_max - beta_min) / steps as f64;
    let (mut lo, mut hi) = ((best.3 - width).max(beta_min), (best.3 + width).min(beta_max));
    let phi = 0.5 * (math::sqrt(5.0) - 1.0);
    for _ in 0..60 {
        let b1 = hi - phi * (hi - lo);
        let b2 = lo + phi * (hi - lo);
        if fit_fixed(hs, values, b1).2 <= fit_fixed(hs, values, b2).2 {
            hi = b2;
        } else {
            lo = b1;
        }
    }
    let beta = 0.5 * (lo + hi);
    let (a0, c, r) = fit_fixed(hs, values, beta);
    let (a0, c, residual, beta) = if r <= best.0 { (a0, c, r, beta) } else { (best.1, best.2, best.0, best.3) };
    Ok(RichardsonFit {
        a0,
        c,
        beta,
        residual,
        hs: hs.to_vec(),
        values: values.to_vec(),
    })
}
