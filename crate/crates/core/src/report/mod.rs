// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment orchestration and result directories.
//!
//! Output layout under the configured `out` directory:
//!
//! ```text
//! labels/<feature>.csv        pair_id,feature_name,value
//! datasets/<feature>.{csv,json}
//! curves/<feature>.{csv,json} layer,r2_test + summary
//! models/<feature>.{best,final}.json
//! verdicts.json
//! group_probe.json
//! comparison.json, spider.csv
//! validation/<feature>.json
//! ```

mod config;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use config::{existing, required};
pub use config::{
    BalanceSection, Bm25Section, CompareRun, CompareSection, CompareStat, CorpusSection, ExperimentConfig,
    FeaturesSection, HeadSection, PlantSection, ProbeSection, SynthSection, ValidateSection,
};

use crate::actstore::{
    read_store, synth_activations, uniform_labels, write_store, ActivationStore, PlantedSignal, SynthSpec,
};
use crate::attribution::{validate_probe_neurons, ScoreHead, ValidationSummary};
use crate::corpus::{balance_labels, load_run, DemoCorpus, ProbeDataset};
use crate::error::{Error, Result};
use crate::irfeatures::{group_values, min_max_normalize, FeatureGroupExpr, FeatureId, LabelColumn, PreparedPairs};
use crate::probekit::{sweep_layers, CurveSummary, LayerCurve, ProbeModel, Sweep};
use crate::rng;

/// File-system-safe stem for a feature or group name.
pub fn file_stem(name: &str) -> String {
    let s: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    s.trim_matches('_').to_string()
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Resolves `all` and aliases to registry ids, rejecting unknown names
/// before any work starts.
pub fn resolve_features(names: &[String]) -> Result<Vec<FeatureId>> {
    let mut out: Vec<FeatureId> = Vec::new();
    for n in names {
        let ids = if n.eq_ignore_ascii_case("all") { FeatureId::all() } else { vec![FeatureId::parse(n)?] };
        for id in ids {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no features requested".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesReport {
    pub files: Vec<PathBuf>,
    pub n_pairs: usize,
}

/// Computes every requested feature (and group) over the run's pairs and
/// writes one label CSV per column to `labels/`.
pub fn cmd_features(cfg: &ExperimentConfig) -> Result<FeaturesReport> {
    let features = resolve_features(&cfg.features.names)?;
    let groups = cfg.features.groups.iter().map(|g| FeatureGroupExpr::parse(g)).collect::<Result<Vec<_>>>()?;
    for g in &groups {
        for leaf in g.leaves() {
            FeatureId::parse(leaf)?;
        }
    }
    let params = cfg.bm25_params()?;
    let run = existing(required(&cfg.corpus.run, "corpus.run")?)?;
    let queries = existing(required(&cfg.corpus.queries, "corpus.queries")?)?;
    let collection = existing(required(&cfg.corpus.collection, "corpus.collection")?)?;

    let pairs = load_run(run, queries, collection)?;
    let prepared = PreparedPairs::new(&pairs)?;
    let dir = cfg.out_dir().join("labels");
    mkdir(&dir)?;

    let mut columns: HashMap<FeatureId, Vec<f64>> = HashMap::new();
    let mut files = Vec::new();
    let mut emit = |name: String, values: Vec<f64>| -> Result<()> {
        let path = dir.join(format!("{}.csv", file_stem(&name)));
        LabelColumn { feature_name: name, pair_ids: prepared.pair_ids().to_vec(), values }.write(&path)?;
        files.push(path);
        Ok(())
    };
    for &f in &features {
        let v = prepared.compute(f, &params)?;
        columns.insert(f, v.clone());
        emit(f.name(), v)?;
    }
    for g in &groups {
        let mut by_leaf = HashMap::new();
        for leaf in g.leaves() {
            let id = FeatureId::parse(leaf)?;
            let col = match columns.get(&id) {
                Some(c) => c.clone(),
                None => {
                    let c = prepared.compute(id, &params)?;
                    columns.insert(id, c.clone());
                    c
                }
            };
            by_leaf.insert(leaf.to_string(), col);
        }
        emit(g.to_string(), group_values(g, &by_leaf, cfg.features.normalize_groups)?)?;
    }
    Ok(FeaturesReport { files, n_pairs: pairs.len() })
}

/// Balances each configured label file into `datasets/<feature>.{csv,json}`.
pub fn cmd_balance(cfg: &ExperimentConfig) -> Result<Vec<ProbeDataset>> {
    let b = &cfg.balance;
    if b.labels.is_empty() {
        return Err(Error::Config("missing `balance.labels`".into()));
    }
    for p in &b.labels {
        existing(p)?;
    }
    let seed = b.seed.unwrap_or(cfg.seed);
    let dir = cfg.out_dir().join("datasets");
    mkdir(&dir)?;
    b.labels
        .iter()
        .map(|p| {
            let col = LabelColumn::read(p)?;
            let ids: Vec<&str> = col.pair_ids.iter().map(String::as_str).collect();
            let ds = balance_labels(&ids, &col.values, &col.feature_name, b.n_bins, b.per_bin, seed)?;
            ds.write(&dir.join(format!("{}.csv", file_stem(&col.feature_name))))?;
            Ok(ds)
        })
        .collect()
}

/// Reads a label CSV, or a balanced dataset when its JSON sidecar exists.
pub fn read_probe_dataset(path: &Path) -> Result<ProbeDataset> {
    if path.with_extension("json").exists() {
        ProbeDataset::read(path)
    } else {
        let col = LabelColumn::read(path)?;
        ProbeDataset::unbinned(col.feature_name, col.pair_ids, col.values)
    }
}

/// Fails listing (up to ten) dataset pair ids the store does not hold.
pub fn check_alignment(store: &ActivationStore, dataset: &ProbeDataset) -> Result<()> {
    let missing: Vec<&str> =
        dataset.pair_ids.iter().filter(|id| store.row_of(id).is_none()).map(String::as_str).collect();
    if missing.is_empty() {
        return Ok(());
    }
    let shown = missing.iter().take(10).copied().collect::<Vec<_>>().join(", ");
    let more = if missing.len() > 10 { format!(" and {} more", missing.len() - 10) } else { String::new() };
    Err(Error::MissingPair(format!(
        "{} of {} `{}` pairs absent from the store: {shown}{more}",
        missing.len(),
        dataset.len(),
        dataset.feature_name
    )))
}

fn write_sweep(out: &Path, sweep: &Sweep) -> Result<()> {
    let stem = file_stem(&sweep.curve.feature_name);
    let curves = out.join("curves");
    let models = out.join("models");
    mkdir(&curves)?;
    mkdir(&models)?;
    sweep.curve.write(&curves.join(format!("{stem}.csv")))?;
    sweep.models[sweep.curve.argmax_layer].write(&models.join(format!("{stem}.best.json")))?;
    sweep.models[sweep.models.len() - 1].write(&models.join(format!("{stem}.final.json")))
}

fn write_verdicts(out: &Path, curves: &[LayerCurve]) -> Result<()> {
    let path = out.join("verdicts.json");
    let mut all: BTreeMap<String, CurveSummary> = if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)?
    } else {
        BTreeMap::new()
    };
    for c in curves {
        all.insert(c.feature_name.clone(), c.summary());
    }
    write_json(&path, &all)
}

/// Layer sweep per label file: curves, best/final models, verdicts.
pub fn cmd_probe(cfg: &ExperimentConfig) -> Result<Vec<LayerCurve>> {
    let config = cfg.probe_config()?;
    let store_path = existing(required(&cfg.probe.store, "probe.store")?)?;
    if cfg.probe.labels.is_empty() {
        return Err(Error::Config("missing `probe.labels`".into()));
    }
    for p in &cfg.probe.labels {
        existing(p)?;
    }
    let store = read_store(store_path)?;
    let datasets = cfg.probe.labels.iter().map(|p| read_probe_dataset(p)).collect::<Result<Vec<_>>>()?;
    for ds in &datasets {
        check_alignment(&store, ds)?;
    }
    let out = cfg.out_dir();
    mkdir(&out)?;
    let mut curves = Vec::with_capacity(datasets.len());
    for ds in &datasets {
        let sweep = sweep_layers(&store, ds, &config)?;
        write_sweep(&out, &sweep)?;
        curves.push(sweep.curve);
    }
    write_verdicts(&out, &curves)?;
    Ok(curves)
}

/// Result of probing one group expression next to its leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProbeSummary {
    pub expr: String,
    pub max_r2: f64,
    pub argmax_layer: usize,
    /// Max test R² of each (normalized) leaf probed alone.
    pub leaves: BTreeMap<String, f64>,
}

/// Reads leaf label columns from `labels_dir`, aligned to the first leaf's
/// pair order. Registry names resolve to their canonical file stem; any
/// other leaf is looked up verbatim.
type LeafColumns = (Vec<String>, HashMap<String, Vec<f64>>);

fn leaf_columns(labels_dir: &Path, leaves: &[&str]) -> Result<LeafColumns> {
    let mut ids: Option<Vec<String>> = None;
    let mut cols = HashMap::new();
    for &leaf in leaves {
        let stem = FeatureId::parse(leaf).map(|f| file_stem(&f.name())).unwrap_or_else(|_| file_stem(leaf));
        let path = labels_dir.join(format!("{stem}.csv"));
        if !path.exists() {
            return Err(Error::MissingLeaf(format!("{leaf} (no {})", path.display())));
        }
        let col = LabelColumn::read(&path)?;
        let values = match &ids {
            None => {
                ids = Some(col.pair_ids.clone());
                col.values
            }
            Some(order) => {
                let pos: HashMap<&str, usize> =
                    col.pair_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
                order
                    .iter()
                    .map(|id| {
                        pos.get(id.as_str())
                            .map(|&i| col.values[i])
                            .ok_or_else(|| Error::MissingPair(format!("{id} (leaf `{leaf}`)")))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        cols.insert(leaf.to_string(), values);
    }
    Ok((ids.unwrap_or_default(), cols))
}

/// Probes each group expression and each of its leaves on the same pairs.
pub fn cmd_group_probe(cfg: &ExperimentConfig) -> Result<Vec<GroupProbeSummary>> {
    let config = cfg.probe_config()?;
    if cfg.features.groups.is_empty() {
        return Err(Error::Config("missing `features.groups`".into()));
    }
    let groups = cfg.features.groups.iter().map(|g| FeatureGroupExpr::parse(g)).collect::<Result<Vec<_>>>()?;
    let labels_dir = existing(required(&cfg.features.labels_dir, "features.labels_dir")?)?;
    let store_path = existing(required(&cfg.probe.store, "probe.store")?)?;
    let store = read_store(store_path)?;
    let out = cfg.out_dir();
    mkdir(&out)?;

    let mut summaries = Vec::with_capacity(groups.len());
    let mut curves = Vec::new();
    for g in &groups {
        let leaves = g.leaves();
        let (ids, cols) = leaf_columns(labels_dir, &leaves)?;
        let values = group_values(g, &cols, cfg.features.normalize_groups)?;
        let ds = ProbeDataset::unbinned(g.to_string(), ids.clone(), values)?;
        check_alignment(&store, &ds)?;
        let sweep = sweep_layers(&store, &ds, &config)?;
        write_sweep(&out, &sweep)?;

        let mut leaf_r2 = BTreeMap::new();
        for leaf in &leaves {
            let raw = &cols[*leaf];
            let v = if cfg.features.normalize_groups { min_max_normalize(raw) } else { raw.clone() };
            let lds = ProbeDataset::unbinned(leaf.to_string(), ids.clone(), v)?;
            leaf_r2.insert(leaf.to_string(), sweep_layers(&store, &lds, &config)?.curve.max_r2);
        }
        summaries.push(GroupProbeSummary {
            expr: g.to_string(),
            max_r2: sweep.curve.max_r2,
            argmax_layer: sweep.curve.argmax_layer,
            leaves: leaf_r2,
        });
        curves.push(sweep.curve);
    }
    write_verdicts(&out, &curves)?;
    write_json(&out.join("group_probe.json"), &summaries)?;
    Ok(summaries)
}

/// Feature-by-run table of one curve statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub stat: CompareStat,
    pub layers: Option<[usize; 2]>,
    pub runs: Vec<String>,
    pub features: Vec<String>,
    /// `cells[feature][run]`, raw (possibly negative) R².
    pub cells: Vec<Vec<f64>>,
}

impl ComparisonTable {
    /// Long-format spider data; negative R² is clamped to 0 in `value`.
    pub fn spider_csv(&self) -> String {
        let mut s = String::from("feature,run,value,raw\n");
        for (f, row) in self.features.iter().zip(&self.cells) {
            for (r, v) in self.runs.iter().zip(row) {
                s.push_str(&format!("{f},{r},{},{v}\n", v.max(0.0)));
            }
        }
        s
    }
}

fn read_curves(dir: &Path) -> Result<BTreeMap<String, LayerCurve>> {
    let curves_dir = dir.join("curves");
    let entries = fs::read_dir(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
    let mut out = BTreeMap::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(&curves_dir, e))?.path();
        if path.extension().and_then(|x| x.to_str()) != Some("csv") {
            continue;
        }
        let json = path.with_extension("json");
        let name = if json.exists() {
            let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
            serde_json::from_str::<CurveSummary>(&text)?.feature
        } else {
            path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
        };
        let curve = LayerCurve::read_csv(&name, &path)?;
        out.insert(name, curve);
    }
    Ok(out)
}

/// Builds the comparison table from labelled probe output directories.
pub fn compare_runs(runs: &[CompareRun], stat: CompareStat, layers: Option<[usize; 2]>) -> Result<ComparisonTable> {
    if runs.len() < 2 {
        return Err(Error::Config("comparison needs at least two runs".into()));
    }
    let mut labels = BTreeSet::new();
    for r in runs {
        if !labels.insert(r.label.as_str()) {
            return Err(Error::Config(format!("duplicate run label `{}`", r.label)));
        }
        existing(&r.dir)?;
    }
    if let Some([lo, hi]) = layers {
        if lo > hi {
            return Err(Error::Config(format!("empty layer range {lo}..={hi}")));
        }
    }
    let per_run = runs.iter().map(|r| read_curves(&r.dir)).collect::<Result<Vec<_>>>()?;
    let features: Vec<String> = per_run[0].keys().cloned().collect();
    if features.is_empty() {
        return Err(Error::Config(format!("no curves under {}", runs[0].dir.display())));
    }
    for (r, curves) in runs.iter().zip(&per_run).skip(1) {
        let theirs: Vec<&String> = curves.keys().collect();
        if theirs != features.iter().collect::<Vec<_>>() {
            return Err(Error::Config(format!(
                "feature lists differ: `{}` has [{}], `{}` has [{}]",
                runs[0].label,
                features.join(", "),
                r.label,
                theirs.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
    }
    let cells = features
        .iter()
        .map(|f| {
            per_run
                .iter()
                .map(|curves| {
                    let c = &curves[f];
                    match stat {
                        CompareStat::Final => c.final_r2(),
                        CompareStat::Max => match layers {
                            Some([lo, hi]) => c.max_over(lo..=hi),
                            None => c.max_r2,
                        },
                    }
                })
                .collect()
        })
        .collect();
    Ok(ComparisonTable { stat, layers, runs: runs.iter().map(|r| r.label.clone()).collect(), features, cells })
}

/// Writes `comparison.json` and `spider.csv`.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<ComparisonTable> {
    let c = &cfg.compare;
    let table = compare_runs(&c.runs, c.stat, c.layers)?;
    let out = cfg.out_dir();
    mkdir(&out)?;
    write_json(&out.join("comparison.json"), &table)?;
    let spider = out.join("spider.csv");
    fs::write(&spider, table.spider_csv()).map_err(|e| Error::io(&spider, e))?;
    Ok(table)
}

/// Attribution check of a final-layer probe; writes `validation/<feature>.json`.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<ValidationSummary> {
    let v = &cfg.validate;
    let store_path = existing(required(&v.store, "validate.store")?)?;
    let model_path = existing(required(&v.probe_model, "validate.probe_model")?)?;
    let head_path = existing(required(&v.head, "validate.head")?)?;
    let store = read_store(store_path)?;
    let probe = ProbeModel::read(model_path)?;
    let head = ScoreHead::read(head_path)?;
    let seed = v.seed.unwrap_or(cfg.seed);
    let summary = validate_probe_neurons(&probe, &store, &head, v.n_pairs, seed, v.baseline)?;
    let dir = cfg.out_dir().join("validation");
    mkdir(&dir)?;
    write_json(&dir.join(format!("{}.json", file_stem(&summary.feature))), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthReport {
    pub store: PathBuf,
    pub labels: Vec<PathBuf>,
    pub head: Option<PathBuf>,
}

/// Synthetic store with planted signals (`store.aprb`), their label files,
/// and an optional aligned score head (`head.json`).
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<SynthReport> {
    let s = &cfg.synth;
    let seed = s.seed.unwrap_or(cfg.seed);
    let plants: Vec<PlantSection> = if s.plant.is_empty() { vec![PlantSection::default()] } else { s.plant.clone() };
    let mut pair_ids: Option<Vec<String>> = None;
    let mut columns: Vec<LabelColumn> = Vec::with_capacity(plants.len());
    for (k, p) in plants.iter().enumerate() {
        let col = match &p.labels {
            Some(path) => {
                let mut col = LabelColumn::read(existing(path)?)?;
                if let Some(ids) = &pair_ids {
                    if *ids != col.pair_ids {
                        return Err(Error::Config(format!(
                            "planted label files disagree on pair ids: {}",
                            path.display()
                        )));
                    }
                }
                col.feature_name = p.feature.clone();
                col
            }
            None => {
                let ids = pair_ids.clone().unwrap_or_else(|| (0..s.n_samples).map(|i| format!("s{i}")).collect());
                let [lo, hi] = p.uniform;
                if !(lo < hi) {
                    return Err(Error::Config(format!("empty uniform label range [{lo}, {hi})")));
                }
                let values = uniform_labels(rng::mix(seed, &format!("labels/{k}")), ids.len(), lo, hi);
                LabelColumn { feature_name: p.feature.clone(), pair_ids: ids, values }
            }
        };
        pair_ids.get_or_insert_with(|| col.pair_ids.clone());
        columns.push(col);
    }
    let pair_ids = pair_ids.unwrap_or_default();

    let mut spec = SynthSpec::new(seed, pair_ids.len(), s.n_layers, s.n_neurons);
    spec.pair_ids = pair_ids;
    spec.dtype = s.dtype;
    for (p, col) in plants.iter().zip(&columns) {
        if !(p.noise_frac >= 0.0 && p.noise_frac.is_finite()) {
            return Err(Error::Config(format!("noise_frac must be >= 0, got {}", p.noise_frac)));
        }
        spec = spec.plant(PlantedSignal {
            layer: p.layer_in(s.n_layers),
            neurons: p.neurons_in(s.n_neurons),
            weights: p.weights.clone(),
            labels: col.values.clone(),
            noise_sd: p.noise_frac * sd(&col.values),
        });
    }
    let store = synth_activations(&spec)?;

    let out = cfg.out_dir();
    let labels_dir = out.join("labels");
    mkdir(&labels_dir)?;
    let store_path = out.join("store.aprb");
    write_store(&store, &store_path)?;
    let mut labels = Vec::with_capacity(columns.len());
    for col in &columns {
        let path = labels_dir.join(format!("{}.csv", file_stem(&col.feature_name)));
        col.write(&path)?;
        labels.push(path);
    }
    let head = match &s.head {
        None => None,
        Some(h) => {
            let p = plants.get(h.plant).ok_or(Error::IndexOutOfRange { index: h.plant, len: plants.len() })?;
            let head =
                aligned_head(s.n_neurons, &p.neurons_in(s.n_neurons), &p.weights, h.noise_sd, rng::mix(seed, "head"))?;
            let path = out.join("head.json");
            head.write(&path)?;
            Some(path)
        }
    };
    Ok(SynthReport { store: store_path, labels, head })
}

/// Head with `weights` on `neurons` plus N(0, noise_sd²) on every neuron.
pub fn aligned_head(
    n_neurons: usize,
    neurons: &[usize],
    weights: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<ScoreHead> {
    let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::Config(format!("head noise: {e}")))?;
    let mut r = rng::seeded(seed);
    let mut w: Vec<f64> = (0..n_neurons).map(|_| normal.sample(&mut r)).collect();
    for (&j, &v) in neurons.iter().zip(weights) {
        *w.get_mut(j).ok_or(Error::IndexOutOfRange { index: j, len: n_neurons })? += v;
    }
    Ok(ScoreHead { weights: w, bias: 0.0 })
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Writes a synthetic retrieval corpus to `<out>/corpus`.
pub fn cmd_demo(cfg: &ExperimentConfig, n_queries: usize, docs_per_query: usize) -> Result<PathBuf> {
    if n_queries == 0 || docs_per_query == 0 {
        return Err(Error::Config("demo corpus needs at least one query and one document".into()));
    }
    let dir = cfg.out_dir().join("corpus");
    DemoCorpus::generate(cfg.seed, n_queries, docs_per_query).write(&dir)?;
    Ok(dir)
}
