// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse linear probes from layer activations to feature labels.
//!
//! Each probe standardizes the layer's neurons, fits an L1-penalized least
//! squares model by coordinate descent, and is scored with R². A sweep runs
//! one probe per layer and summarizes the resulting curve.

mod lasso;
mod metrics;
mod standardize;

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lasso::{fit_lasso, fit_lasso_observed, objective, soft_threshold, LassoFit};
pub use metrics::r2_score;
pub use standardize::{standardize, Standardizer};

use crate::actstore::ActivationStore;
use crate::corpus::{split_indices, ProbeDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::rng;

/// R² above which a feature counts as encoded somewhere in the network.
pub const PRESENT_THRESHOLD: f64 = 0.85;
/// Final-layer R² below which a feature counts as not encoded.
pub const ABSENT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// L1 strength.
    pub alpha: f64,
    /// Optional ridge term; 0 gives the plain Lasso.
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub k_folds: usize,
    pub seed: u64,
    pub split: SplitSpec,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { alpha: 0.1, l2: 0.0, max_iter: 10_000, tol: 1e-6, k_folds: 5, seed: 0, split: SplitSpec::default() }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        self.split.validate()
    }
}

/// A fitted probe for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub feature_name: String,
    pub layer: usize,
    /// Coefficients on standardized activations.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub feature_means: Vec<f64>,
    pub feature_sds: Vec<f64>,
    pub nonzero_idx: Vec<usize>,
    pub r2_train: f64,
    pub r2_val: f64,
    pub r2_test: f64,
    pub converged: bool,
    pub n_iter: usize,
}

#[derive(Serialize, Deserialize)]
struct ProbeModelWire {
    feature: String,
    layer: usize,
    n_neurons: usize,
    intercept: f64,
    coefficients: Vec<(usize, f64)>,
    feature_means: Vec<f64>,
    feature_sds: Vec<f64>,
    nonzero_idx: Vec<usize>,
    r2_train: f64,
    r2_val: f64,
    r2_test: f64,
    converged: bool,
    n_iter: usize,
}

impl ProbeModel {
    /// Prediction for one row of raw (unstandardized) activations.
    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .nonzero_idx
                .iter()
                .map(|&j| self.coefficients[j] * (row[j] - self.feature_means[j]) / self.feature_sds[j])
                .sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        let wire = ProbeModelWire {
            feature: self.feature_name.clone(),
            layer: self.layer,
            n_neurons: self.coefficients.len(),
            intercept: self.intercept,
            coefficients: self.nonzero_idx.iter().map(|&j| (j, self.coefficients[j])).collect(),
            feature_means: self.feature_means.clone(),
            feature_sds: self.feature_sds.clone(),
            nonzero_idx: self.nonzero_idx.clone(),
            r2_train: self.r2_train,
            r2_val: self.r2_val,
            r2_test: self.r2_test,
            converged: self.converged,
            n_iter: self.n_iter,
        };
        Ok(serde_json::to_string_pretty(&wire)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: ProbeModelWire = serde_json::from_str(text)?;
        let mut coefficients = vec![0.0; w.n_neurons];
        for (j, v) in w.coefficients {
            let slot = coefficients.get_mut(j).ok_or(Error::IndexOutOfRange { index: j, len: w.n_neurons })?;
            *slot = v;
        }
        if w.feature_means.len() != w.n_neurons || w.feature_sds.len() != w.n_neurons {
            return Err(Error::Shape("standardization vectors do not match n_neurons".into()));
        }
        Ok(Self {
            feature_name: w.feature,
            layer: w.layer,
            nonzero_idx: nonzero(&coefficients),
            coefficients,
            intercept: w.intercept,
            feature_means: w.feature_means,
            feature_sds: w.feature_sds,
            r2_train: w.r2_train,
            r2_val: w.r2_val,
            r2_test: w.r2_test,
            converged: w.converged,
            n_iter: w.n_iter,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn nonzero(coefficients: &[f64]) -> Vec<usize> {
    coefficients.iter().enumerate().filter(|(_, b)| b.abs() > 0.0).map(|(j, _)| j).collect()
}

fn select_rows(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn select(y: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| y[i]).collect()
}

/// Fits one probe on a layer matrix already aligned with `y`.
///
/// The matrix is standardized, split per `config.split`, and fitted on the
/// training rows. The coordinate-descent pass with the best validation R²
/// is kept; test R² is reported for it.
pub fn fit_probe(
    feature_name: &str,
    layer: usize,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    config: &ProbeConfig,
) -> Result<ProbeModel> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} rows vs {} labels", x.nrows(), y.len())));
    }
    let st = Standardizer::fit(x)?;
    let xs = st.transform(x);
    let split = split_indices(y.len(), &config.split)?;
    for (name, part) in [("train", &split.train), ("validation", &split.val), ("test", &split.test)] {
        if part.len() < 2 {
            return Err(Error::Shape(format!("{name} split has {} rows; need at least 2", part.len())));
        }
    }
    let (x_tr, y_tr) = (select_rows(xs.view(), &split.train), select(y, &split.train));
    let (x_va, y_va) = (select_rows(xs.view(), &split.val), select(y, &split.val));
    let (x_te, y_te) = (select_rows(xs.view(), &split.test), select(y, &split.test));

    let mut best: Option<(f64, LassoFit)> = None;
    let mut val_err = None;
    let last =
        fit_lasso_observed(x_tr.view(), &y_tr, config, |fit| match r2_score(&y_va, &fit.predict(x_va.view())) {
            Ok(r2) if best.as_ref().is_none_or(|(b, _)| r2 > *b) => best = Some((r2, fit.clone())),
            Ok(_) => {}
            Err(e) => val_err = Some(e),
        })?;
    if let Some(e) = val_err {
        return Err(e);
    }
    let (r2_val, mut fit) = best.unwrap_or((f64::NEG_INFINITY, last.clone()));
    fit.converged = last.converged;
    fit.n_iter = last.n_iter;

    Ok(ProbeModel {
        feature_name: feature_name.to_string(),
        layer,
        nonzero_idx: nonzero(&fit.coefficients),
        r2_train: r2_score(&y_tr, &fit.predict(x_tr.view()))?,
        r2_val,
        r2_test: r2_score(&y_te, &fit.predict(x_te.view()))?,
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        feature_means: st.means,
        feature_sds: st.sds,
        converged: fit.converged,
        n_iter: fit.n_iter,
    })
}

/// Per-fold and mean held-out R² of k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub mean_r2: f64,
    pub per_fold: Vec<f64>,
}

/// Seeded k-fold cross-validation. Each fold standardizes on its training
/// rows. A held-out fold whose targets are constant (e.g. a single row in
/// leave-one-out) is scored against the training-fold mean instead of its
/// own mean.
pub fn cross_validate(x: ArrayView2<'_, f64>, y: &[f64], config: &ProbeConfig) -> Result<CvResult> {
    config.validate()?;
    let n = y.len();
    let k = config.k_folds;
    if x.nrows() != n {
        return Err(Error::Shape(format!("{} rows vs {n} labels", x.nrows())));
    }
    if n < k {
        return Err(Error::Config(format!("{n} samples cannot form {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(config.seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % k;
    }

    let per_fold = (0..k)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let x_tr = select_rows(x, &train);
            let st = Standardizer::fit(x_tr.view())?;
            let y_tr = select(y, &train);
            let fit = fit_lasso(st.transform(x_tr.view()).view(), &y_tr, config)?;
            let x_te = st.transform(select_rows(x, &test).view());
            let y_te = select(y, &test);
            let pred = fit.predict(x_te.view());
            match r2_score(&y_te, &pred) {
                Err(Error::DegenerateTarget) => {
                    let m = y_tr.iter().sum::<f64>() / y_tr.len() as f64;
                    metrics::r2_against(&y_te, &pred, m)
                }
                other => other,
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CvResult { mean_r2: per_fold.iter().sum::<f64>() / k as f64, per_fold })
}

/// Test R² per layer for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub feature_name: String,
    pub r2_test: Vec<f64>,
    pub r2_val: Vec<f64>,
    pub argmax_layer: usize,
    pub max_r2: f64,
}

/// Presence call derived from a [`LayerCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Present,
    Weak,
    Absent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Present => "present",
            Verdict::Weak => "weak",
            Verdict::Absent => "absent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub feature: String,
    pub argmax_layer: usize,
    pub max_r2: f64,
    pub final_r2: f64,
    pub present: bool,
    pub absent: bool,
    pub verdict: Verdict,
}

impl LayerCurve {
    /// Builds the curve; argmax ties go to the lowest layer.
    pub fn new(feature_name: &str, r2_test: Vec<f64>, r2_val: Vec<f64>) -> Result<Self> {
        if r2_test.is_empty() {
            return Err(Error::Empty("layer curve"));
        }
        let (argmax_layer, max_r2) = argmax(&r2_test, 0..=r2_test.len() - 1);
        Ok(Self { feature_name: feature_name.to_string(), r2_test, r2_val, argmax_layer, max_r2 })
    }

    pub fn n_layers(&self) -> usize {
        self.r2_test.len()
    }

    pub fn final_r2(&self) -> f64 {
        *self.r2_test.last().expect("nonempty curve")
    }

    /// Maximum test R² restricted to a layer range (clipped to the curve).
    pub fn max_over(&self, layers: RangeInclusive<usize>) -> f64 {
        let hi = (*layers.end()).min(self.n_layers() - 1);
        let lo = (*layers.start()).min(hi);
        argmax(&self.r2_test, lo..=hi).1
    }

    pub fn verdict(&self) -> Verdict {
        if self.max_r2 > PRESENT_THRESHOLD {
            Verdict::Present
        } else if self.final_r2() < ABSENT_THRESHOLD {
            Verdict::Absent
        } else {
            Verdict::Weak
        }
    }

    pub fn summary(&self) -> CurveSummary {
        let verdict = self.verdict();
        CurveSummary {
            feature: self.feature_name.clone(),
            argmax_layer: self.argmax_layer,
            max_r2: self.max_r2,
            final_r2: self.final_r2(),
            present: verdict == Verdict::Present,
            absent: verdict == Verdict::Absent,
            verdict,
        }
    }

    /// CSV `layer,r2_test`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,r2_test\n");
        for (l, r) in self.r2_test.iter().enumerate() {
            let _ = writeln!(s, "{l},{r}");
        }
        s
    }

    /// Writes `<stem>.csv` and the `<stem>.json` summary.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        let json_path = csv_path.with_extension("json");
        let body = serde_json::to_string_pretty(&self.summary())? + "\n";
        fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))
    }

    /// Reads a curve back from its CSV (validation R² is not stored there).
    pub fn read_csv(feature_name: &str, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut r2 = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::Parse {
                path: path.into(),
                line: i + 1,
                msg: format!("expected `layer,r2_test`, got `{line}`"),
            };
            let (l, v) = line.split_once(',').ok_or_else(bad)?;
            if l.trim().parse::<usize>().map_err(|_| bad())? != r2.len() {
                return Err(bad());
            }
            r2.push(v.trim().parse::<f64>().map_err(|_| bad())?);
        }
        Self::new(feature_name, r2, Vec::new())
    }
}

fn argmax(xs: &[f64], range: RangeInclusive<usize>) -> (usize, f64) {
    let mut best = (*range.start(), xs[*range.start()]);
    for l in range {
        if xs[l] > best.1 {
            best = (l, xs[l]);
        }
    }
    best
}

/// Curve plus the per-layer models behind it.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub curve: LayerCurve,
    pub models: Vec<ProbeModel>,
}

/// One probe per layer; layers run in parallel and merge by index.
pub fn sweep_layers(store: &ActivationStore, dataset: &ProbeDataset, config: &ProbeConfig) -> Result<Sweep> {
    config.validate()?;
    let rows = store.rows_for(&dataset.pair_ids)?;
    let models = (0..store.n_layers())
        .into_par_iter()
        .map(|layer| {
            let x = Array2::from_shape_fn((rows.len(), store.n_neurons()), |(i, j)| store.value(layer, rows[i], j));
            fit_probe(&dataset.feature_name, layer, x.view(), &dataset.labels, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = LayerCurve::new(
        &dataset.feature_name,
        models.iter().map(|m| m.r2_test).collect(),
        models.iter().map(|m| m.r2_val).collect(),
    )?;
    Ok(Sweep { curve, models })
}
