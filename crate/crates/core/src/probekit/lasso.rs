// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cyclic coordinate descent for
//!
//! ```text
//! (1 / 2n) ||y - X b - b0||^2 + alpha ||b||_1 + (l2 / 2) ||b||^2
//! ```
//!
//! The intercept is never penalized; columns are centered internally so it
//! drops out of the coordinate updates.

use ndarray::ArrayView2;

use super::ProbeConfig;
use crate::error::{Error, Result};

#[inline]
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Full passes over the coordinates.
    pub n_iter: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let nz: Vec<(usize, f64)> =
            self.coefficients.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, b)| (j, *b)).collect();
        x.rows().into_iter().map(|r| self.intercept + nz.iter().map(|(j, b)| r[*j] * b).sum::<f64>()).collect()
    }
}

/// The Lasso objective value (including the optional L2 term).
pub fn objective(x: ArrayView2<'_, f64>, y: &[f64], coefficients: &[f64], intercept: f64, alpha: f64, l2: f64) -> f64 {
    let n = y.len() as f64;
    let rss: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(r, yi)| {
            let p = intercept + r.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>();
            (yi - p) * (yi - p)
        })
        .sum();
    let l1: f64 = coefficients.iter().map(|b| b.abs()).sum();
    let sq: f64 = coefficients.iter().map(|b| b * b).sum();
    rss / (2.0 * n) + alpha * l1 + 0.5 * l2 * sq
}

/// Fits the penalized least-squares problem.
pub fn fit_lasso(x: ArrayView2<'_, f64>, y: &[f64], config: &ProbeConfig) -> Result<LassoFit> {
    fit_lasso_observed(x, y, config, |_| {})
}

/// Like [`fit_lasso`], calling `on_pass` with the iterate after every full pass.
pub fn fit_lasso_observed(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    config: &ProbeConfig,
    mut on_pass: impl FnMut(&LassoFit),
) -> Result<LassoFit> {
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows vs {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 samples, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("probe inputs"));
    }
    config.validate()?;
    let nf = n as f64;

    // Centered columns, stored contiguously.
    let mut means = vec![0.0; d];
    let mut cols = vec![0.0; n * d];
    for j in 0..d {
        let col = x.column(j);
        let m = col.sum() / nf;
        means[j] = m;
        for (dst, v) in cols[j * n..(j + 1) * n].iter_mut().zip(col.iter()) {
            *dst = v - m;
        }
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let sq_norm: Vec<f64> = (0..d).map(|j| cols[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>() / nf).collect();

    let mut fit = LassoFit { coefficients: vec![0.0; d], intercept: y_mean, n_iter: 0, converged: false };
    for pass in 1..=config.max_iter {
        let mut max_change = 0.0f64;
        for j in 0..d {
            let z = sq_norm[j];
            if z == 0.0 {
                continue;
            }
            let col = &cols[j * n..(j + 1) * n];
            let old = fit.coefficients[j];
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + z * old;
            let new = soft_threshold(rho, config.alpha) / (z + config.l2);
            let delta = new - old;
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= delta * a;
                }
                fit.coefficients[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        fit.n_iter = pass;
        fit.intercept = y_mean - means.iter().zip(&fit.coefficients).map(|(m, b)| m * b).sum::<f64>();
        on_pass(&fit);
        if max_change < config.tol {
            fit.converged = true;
            break;
        }
    }
    Ok(fit)
}
