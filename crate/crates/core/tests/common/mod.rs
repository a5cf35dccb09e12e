// SPDX-License-Identifier: MIT OR Apache-2.0

//! Designs and reference solutions shared by the test targets.

#![allow(dead_code)]

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rankprobe::probekit::{fit_lasso, objective, LassoFit};
use rankprobe::ProbeConfig;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut r))
}

/// Centered columns with `(1/n) X^T X = I` (modified Gram-Schmidt).
pub fn orthonormal_design(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut x = gaussian(n, d, seed);
    for j in 0..d {
        let m = x.column(j).sum() / n as f64;
        x.column_mut(j).mapv_inplace(|v| v - m);
        for k in 0..j {
            let proj = x.column(j).dot(&x.column(k)) / n as f64;
            let ck = x.column(k).to_owned();
            x.column_mut(j).zip_mut_with(&ck, |a, b| *a -= proj * b);
        }
        let norm = (x.column(j).dot(&x.column(j)) / n as f64).sqrt();
        x.column_mut(j).mapv_inplace(|v| v / norm);
    }
    x
}

pub fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Closed form for an orthonormal design: `S(x_j . (y - ybar) / n, alpha) / (1 + l2)`.
pub fn orthonormal_solution(x: &Array2<f64>, y: &[f64], alpha: f64, l2: f64) -> Vec<f64> {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    (0..x.ncols())
        .map(|j| {
            let z: f64 = x.column(j).iter().zip(y).map(|(a, b)| a * (b - ybar)).sum::<f64>() / n;
            soft(z, alpha) / (1.0 + l2)
        })
        .collect()
}

/// Smallest alpha that zeroes every coefficient.
pub fn alpha_max(x: &Array2<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let m = col.sum() / n;
            (col.iter().zip(y).map(|(a, b)| (a - m) * (b - ybar)).sum::<f64>() / n).abs()
        })
        .fold(0.0, f64::max)
}

pub fn config(alpha: f64) -> ProbeConfig {
    ProbeConfig { alpha, tol: 1e-12, max_iter: 100_000, ..ProbeConfig::default() }
}

pub fn fit(x: &Array2<f64>, y: &[f64], alpha: f64) -> LassoFit {
    fit_lasso(x.view(), y, &config(alpha)).unwrap()
}

pub fn nnz(f: &LassoFit) -> usize {
    f.coefficients.iter().filter(|b| **b != 0.0).count()
}

/// `y = X beta + noise` with a few strong coefficients.
pub fn sparse_problem(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let x = gaussian(n, d, seed);
    let noise = gaussian(n, 1, seed + 1);
    let y = (0..n).map(|i| 3.0 * x[(i, 0)] - 2.0 * x[(i, 1)] + 0.5 * x[(i, 2)] + 0.3 * noise[(i, 0)] + 1.0).collect();
    (x, y)
}

pub const ALPHA_GRID: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

/// Largest closed-form error for a few orthonormal problems.
pub fn orthonormal_max_error() -> f64 {
    let mut worst = 0.0f64;
    for (seed, alpha, l2) in [(1, 0.1, 0.0), (2, 0.0, 0.0), (3, 0.5, 0.0), (4, 0.1, 0.3)] {
        let x = orthonormal_design(120, 8, seed);
        let noise = gaussian(120, 1, seed + 100);
        let y: Vec<f64> = (0..120).map(|i| 2.0 * x[(i, 0)] - 0.05 * x[(i, 3)] + noise[(i, 0)]).collect();
        let cfg = ProbeConfig { l2, ..config(alpha) };
        let got = fit_lasso(x.view(), &y, &cfg).unwrap();
        for (a, b) in got.coefficients.iter().zip(orthonormal_solution(&x, &y, alpha, l2)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn objective_at(x: &Array2<f64>, y: &[f64], f: &LassoFit, alpha: f64) -> f64 {
    objective(x.view(), y, &f.coefficients, f.intercept, alpha, 0.0)
}
