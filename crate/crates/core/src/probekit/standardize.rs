// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column means and (population) standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Constant columns get `sd = 1`, so they standardize to zeros.
    pub fn fit(x: ArrayView2<'_, f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Shape(format!("standardize needs at least 2 rows, got {n}")));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let first = col[0];
            if col.iter().all(|v| *v == first) {
                // Exact mean, so the column maps to exact zeros.
                means.push(first);
                sds.push(1.0);
                continue;
            }
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            means.push(mean);
            sds.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Self { means, sds })
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.sds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

/// Column-wise zero mean, unit variance.
pub fn standardize(x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<f64>, Vec<f64>)> {
    let st = Standardizer::fit(x)?;
    let xs = st.transform(x);
    Ok((xs, st.means, st.sds))
}
