// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actstore::Dtype;
use crate::attribution::Baseline;
use crate::corpus::SplitSpec;
use crate::error::{Error, Result};
use crate::irfeatures::Bm25Params;
use crate::probekit::ProbeConfig;

/// Whole-experiment description, read from a TOML file.
///
/// Every section is optional; each command checks for the keys it needs.
/// Relative paths in a file resolve against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub corpus: CorpusSection,
    pub features: FeaturesSection,
    pub bm25: Bm25Section,
    pub balance: BalanceSection,
    pub probe: ProbeSection,
    pub compare: CompareSection,
    pub validate: ValidateSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub run: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub collection: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// Feature names or aliases; `all` expands to the full registry.
    pub names: Vec<String>,
    /// Group expressions such as `(QTR+STF+VTFIDF)^2`.
    pub groups: Vec<String>,
    pub normalize_groups: bool,
    /// Directory holding `<feature>.csv` label files.
    pub labels_dir: Option<PathBuf>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self { names: Vec::new(), groups: Vec::new(), normalize_groups: true, labels_dir: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Section {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Section {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self { k1: p.k1, b: p.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSection {
    /// Label files to balance.
    pub labels: Vec<PathBuf>,
    pub n_bins: usize,
    pub per_bin: usize,
    pub seed: Option<u64>,
}

impl Default for BalanceSection {
    fn default() -> Self {
        Self { labels: Vec::new(), n_bins: 10, per_bin: 600, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub store: Option<PathBuf>,
    /// Label or balanced-dataset CSVs to probe.
    pub labels: Vec<PathBuf>,
    pub alpha: f64,
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub k_folds: usize,
    pub seed: Option<u64>,
    pub split: [f64; 3],
}

impl Default for ProbeSection {
    fn default() -> Self {
        let c = ProbeConfig::default();
        Self {
            store: None,
            labels: Vec::new(),
            alpha: c.alpha,
            l2: c.l2,
            max_iter: c.max_iter,
            tol: c.tol,
            k_folds: c.k_folds,
            seed: None,
            split: [c.split.train_frac, c.split.val_frac, c.split.test_frac],
        }
    }
}

/// Which curve statistic fills comparison cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareStat {
    /// Maximum test R² over the layer range (cross-model spider data).
    #[default]
    Max,
    /// Final-layer test R² (in-distribution vs out-of-distribution).
    Final,
}

impl std::str::FromStr for CompareStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(CompareStat::Max),
            "final" => Ok(CompareStat::Final),
            _ => Err(Error::Config(format!("unknown comparison statistic `{s}` (max|final)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRun {
    pub label: String,
    /// Output directory of a `probe` run (must contain `curves/`).
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub runs: Vec<CompareRun>,
    pub stat: CompareStat,
    /// Inclusive layer range for the max statistic; all layers when unset.
    pub layers: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub store: Option<PathBuf>,
    pub probe_model: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub n_pairs: usize,
    pub seed: Option<u64>,
    pub baseline: Baseline,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { store: None, probe_model: None, head: None, n_pairs: 100, seed: None, baseline: Baseline::Zero }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_samples: usize,
    pub n_layers: usize,
    pub n_neurons: usize,
    pub dtype: Dtype,
    pub seed: Option<u64>,
    pub plant: Vec<PlantSection>,
    pub head: Option<HeadSection>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            n_layers: 5,
            n_neurons: 256,
            dtype: Dtype::F32,
            seed: None,
            plant: Vec::new(),
            head: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub feature: String,
    /// Defaults to the second-to-last layer.
    pub layer: Option<usize>,
    /// Defaults to three neurons spread over the width.
    pub neurons: Vec<usize>,
    pub weights: Vec<f64>,
    /// Label CSV whose pair ids become the store's rows; uniform labels on
    /// `uniform` when unset.
    pub labels: Option<PathBuf>,
    pub uniform: [f64; 2],
    /// Noise sd as a fraction of the label sd.
    pub noise_frac: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            feature: "planted".into(),
            layer: None,
            neurons: Vec::new(),
            weights: vec![1.5, -2.0, 1.0],
            labels: None,
            uniform: [0.0, 10.0],
            noise_frac: 0.01,
        }
    }
}

impl PlantSection {
    pub fn layer_in(&self, n_layers: usize) -> usize {
        self.layer.unwrap_or(n_layers.saturating_sub(2))
    }

    pub fn neurons_in(&self, n_neurons: usize) -> Vec<usize> {
        if self.neurons.is_empty() {
            vec![n_neurons / 15, n_neurons * 2 / 5, n_neurons * 4 / 5]
        } else {
            self.neurons.clone()
        }
    }
}

/// Score head aligned with one planted signal's weights on its neurons,
/// plus iid normal weights of sd `noise_sd` on every neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSection {
    pub plant: usize,
    pub noise_sd: f64,
}

impl Default for HeadSection {
    fn default() -> Self {
        Self { plant: 0, noise_sd: 0.25 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; relative paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix_opt(&mut self.out);
        fix_opt(&mut self.corpus.run);
        fix_opt(&mut self.corpus.queries);
        fix_opt(&mut self.corpus.collection);
        fix_opt(&mut self.features.labels_dir);
        self.balance.labels.iter_mut().for_each(fix);
        fix_opt(&mut self.probe.store);
        self.probe.labels.iter_mut().for_each(fix);
        self.compare.runs.iter_mut().for_each(|r| fix(&mut r.dir));
        fix_opt(&mut self.validate.store);
        fix_opt(&mut self.validate.probe_model);
        fix_opt(&mut self.validate.head);
        for p in &mut self.synth.plant {
            fix_opt(&mut p.labels);
        }
    }

    /// Forces one seed everywhere (the `--seed` flag).
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.balance.seed = None;
        self.probe.seed = None;
        self.validate.seed = None;
        self.synth.seed = None;
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn bm25_params(&self) -> Result<Bm25Params> {
        Bm25Params::new(self.bm25.k1, self.bm25.b)
    }

    pub fn probe_config(&self) -> Result<ProbeConfig> {
        let seed = self.probe.seed.unwrap_or(self.seed);
        let [tr, va, te] = self.probe.split;
        let cfg = ProbeConfig {
            alpha: self.probe.alpha,
            l2: self.probe.l2,
            max_iter: self.probe.max_iter,
            tol: self.probe.tol,
            k_folds: self.probe.k_folds,
            seed,
            split: SplitSpec::new(tr, va, te, seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Unwraps a required key or reports it as a configuration error.
pub(crate) fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| Error::Config(format!("missing `{key}`")))
}

/// Fails with a configuration error unless `path` exists.
pub(crate) fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Config(format!("path does not exist: {}", path.display())))
    }
}
