// SPDX-License-Identifier: MIT OR Apache-2.0

//! Query-document pairs, retrieval runs, and probing datasets.
//!
//! A [`PairSet`] is assembled from a retrieval run plus the query and
//! document text tables. Each query's retrieved list doubles as its corpus
//! for document-frequency statistics. [`build_balanced_dataset`] turns a
//! label vector into a [`ProbeDataset`] with roughly uniform occupancy over
//! the label range, and [`split_dataset`] produces seeded train/val/test
//! partitions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// The probing unit: one query, one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDocPair {
    pub pair_id: String,
    pub query_id: String,
    pub query_text: String,
    pub doc_id: String,
    pub doc_text: String,
}

impl QueryDocPair {
    /// Stable identifier derived from the query and document ids.
    pub fn make_id(query_id: &str, doc_id: &str) -> String {
        format!("{query_id}:{doc_id}")
    }
}

/// Ordered pairs plus each query's retrieved corpus (doc ids in rank order).
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: Vec<QueryDocPair>,
    per_query_corpus: BTreeMap<String, Vec<String>>,
}

impl PairSet {
    /// Validates uniqueness, non-empty texts, and corpus membership.
    pub fn new(pairs: Vec<QueryDocPair>, per_query_corpus: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p.pair_id.as_str()) {
                return Err(Error::Duplicate(p.pair_id.clone()));
            }
            if p.query_text.trim().is_empty() {
                return Err(Error::Empty("query text"));
            }
            if p.doc_text.trim().is_empty() {
                return Err(Error::Empty("document text"));
            }
            let listed = per_query_corpus.get(&p.query_id).is_some_and(|docs| docs.iter().any(|d| d == &p.doc_id));
            if !listed {
                return Err(Error::UnresolvedId(p.doc_id.clone()));
            }
        }
        for docs in per_query_corpus.values() {
            let mut s = HashSet::with_capacity(docs.len());
            for d in docs {
                if !s.insert(d.as_str()) {
                    return Err(Error::Duplicate(d.clone()));
                }
            }
        }
        Ok(Self { pairs, per_query_corpus })
    }

    pub fn pairs(&self) -> &[QueryDocPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn per_query_corpus(&self) -> &BTreeMap<String, Vec<String>> {
        &self.per_query_corpus
    }

    /// Pair indices grouped by query id, in pair order.
    pub fn indices_by_query(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, p) in self.pairs.iter().enumerate() {
            out.entry(p.query_id.as_str()).or_default().push(i);
        }
        out
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parse a UTF-8 `id<TAB>text` table.
pub fn read_tsv_table(path: &Path) -> Result<HashMap<String, String>> {
    let text = read_to_string(path)?;
    let mut out = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, body)) = line.split_once('\t') else {
            return Err(Error::Parse { path: path.into(), line: lineno + 1, msg: "expected `id<TAB>text`".into() });
        };
        if out.insert(id.trim().to_string(), body.to_string()).is_some() {
            return Err(Error::Duplicate(id.trim().to_string()));
        }
    }
    Ok(out)
}

/// One parsed line of a retrieval run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub docid: String,
    pub rank: Option<u32>,
}

/// Parse a 6-column TREC run (`qid Q0 docid rank score tag`) or a
/// 2-column `qid docid` file. Entries come back grouped per query in rank
/// order; queries keep first-appearance order.
pub fn parse_run(path: &Path) -> Result<Vec<RunEntry>> {
    let text = read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let entry = match cols.len() {
            0 => continue,
            2 => RunEntry { qid: cols[0].to_string(), docid: cols[1].to_string(), rank: None },
            6 => {
                let rank = cols[3].parse::<u32>().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("bad rank `{}`", cols[3]),
                })?;
                cols[4].parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("bad score `{}`", cols[4]),
                })?;
                RunEntry { qid: cols[0].to_string(), docid: cols[2].to_string(), rank: Some(rank) }
            }
            n => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("expected 2 or 6 columns, found {n}"),
                })
            }
        };
        entries.push(entry);
    }

    // Stable grouping: queries in first-appearance order, docs by rank
    // (file order breaks ties and orders rankless lines).
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<(usize, &RunEntry)>> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        let g = groups.entry(e.qid.as_str()).or_insert_with(|| {
            order.push(e.qid.as_str());
            Vec::new()
        });
        g.push((i, e));
    }
    let mut out = Vec::with_capacity(entries.len());
    for q in order {
        let mut g = groups.remove(q).unwrap_or_default();
        g.sort_by_key(|(i, e)| (e.rank.unwrap_or(0), *i));
        out.extend(g.into_iter().map(|(_, e)| e.clone()));
    }
    Ok(out)
}

/// Assemble a [`PairSet`] from a run plus query and collection tables.
pub fn load_run(run_file: &Path, queries_file: &Path, collection_file: &Path) -> Result<PairSet> {
    let run = parse_run(run_file)?;
    let queries = read_tsv_table(queries_file)?;
    let collection = read_tsv_table(collection_file)?;
    pairs_from_run(&run, &queries, &collection)
}

/// In-memory counterpart of [`load_run`].
pub fn pairs_from_run(
    run: &[RunEntry],
    queries: &HashMap<String, String>,
    collection: &HashMap<String, String>,
) -> Result<PairSet> {
    let mut seen = HashSet::with_capacity(run.len());
    let mut pairs = Vec::with_capacity(run.len());
    let mut corpus: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in run {
        if !seen.insert((e.qid.as_str(), e.docid.as_str())) {
            return Err(Error::Duplicate(format!("{} {}", e.qid, e.docid)));
        }
        let query_text = queries.get(&e.qid).ok_or_else(|| Error::UnresolvedId(e.qid.clone()))?;
        let doc_text = collection.get(&e.docid).ok_or_else(|| Error::UnresolvedId(e.docid.clone()))?;
        corpus.entry(e.qid.clone()).or_default().push(e.docid.clone());
        pairs.push(QueryDocPair {
            pair_id: QueryDocPair::make_id(&e.qid, &e.docid),
            query_id: e.qid.clone(),
            query_text: query_text.clone(),
            doc_id: e.docid.clone(),
            doc_text: doc_text.clone(),
        });
    }
    PairSet::new(pairs, corpus)
}

/// Balanced probing dataset for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDataset {
    pub pair_ids: Vec<String>,
    pub labels: Vec<f64>,
    pub feature_name: String,
    pub bin_edges: Vec<f64>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DatasetSidecar {
    feature_name: String,
    bin_edges: Vec<f64>,
    seed: u64,
}

impl ProbeDataset {
    /// A dataset without balancing metadata, e.g. labels read straight from CSV.
    pub fn unbinned(feature_name: impl Into<String>, pair_ids: Vec<String>, labels: Vec<f64>) -> Result<Self> {
        if pair_ids.len() != labels.len() {
            return Err(Error::Shape(format!("{} pair ids vs {} labels", pair_ids.len(), labels.len())));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        Ok(Self { pair_ids, labels, feature_name: feature_name.into(), bin_edges: Vec::new(), seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Occupancy of each declared bin.
    pub fn bin_counts(&self) -> Vec<usize> {
        if self.bin_edges.len() < 2 {
            return Vec::new();
        }
        let n_bins = self.bin_edges.len() - 1;
        let lo = self.bin_edges[0];
        let hi = self.bin_edges[n_bins];
        let mut counts = vec![0; n_bins];
        for &v in &self.labels {
            counts[bin_index(v, lo, hi, n_bins)] += 1;
        }
        counts
    }

    /// Writes `<stem>.csv` (`pair_id,label`) and `<stem>.json` (metadata).
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut out = String::from("pair_id,label\n");
        for (id, v) in self.pair_ids.iter().zip(&self.labels) {
            let _ = writeln!(out, "{id},{v}");
        }
        fs::write(csv_path, out).map_err(|e| Error::io(csv_path, e))?;
        let sidecar = DatasetSidecar {
            feature_name: self.feature_name.clone(),
            bin_edges: self.bin_edges.clone(),
            seed: self.seed,
        };
        let json_path = csv_path.with_extension("json");
        let body = serde_json::to_string_pretty(&sidecar)?;
        fs::write(&json_path, body + "\n").map_err(|e| Error::io(&json_path, e))
    }

    pub fn read(csv_path: &Path) -> Result<Self> {
        let json_path = csv_path.with_extension("json");
        let sidecar: DatasetSidecar = serde_json::from_str(&read_to_string(&json_path)?)?;
        let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(csv_path, io),
            other => Error::Parse { path: csv_path.into(), line: 0, msg: format!("{other:?}") },
        })?;
        let mut pair_ids = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.deserialize::<(String, f64)>() {
            let (id, v) = rec?;
            pair_ids.push(id);
            labels.push(v);
        }
        let mut ds = Self::unbinned(sidecar.feature_name, pair_ids, labels)?;
        ds.bin_edges = sidecar.bin_edges;
        ds.seed = sidecar.seed;
        Ok(ds)
    }
}

fn bin_index(v: f64, lo: f64, hi: f64, n_bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let t = ((v - lo) / (hi - lo) * n_bins as f64).floor();
    (t.max(0.0) as usize).min(n_bins - 1)
}

/// Equal-width bins over the label range, at most `per_bin` pairs sampled
/// from each bin without replacement. Bins with fewer candidates keep all
/// of them. Selected pairs keep their original relative order.
pub fn build_balanced_dataset(
    pairs: &PairSet,
    labels: &[f64],
    feature_name: &str,
    n_bins: usize,
    per_bin: usize,
    seed: u64,
) -> Result<ProbeDataset> {
    let ids: Vec<&str> = pairs.pairs().iter().map(|p| p.pair_id.as_str()).collect();
    balance_labels(&ids, labels, feature_name, n_bins, per_bin, seed)
}

/// [`build_balanced_dataset`] over bare pair ids.
pub fn balance_labels(
    pair_ids: &[&str],
    labels: &[f64],
    feature_name: &str,
    n_bins: usize,
    per_bin: usize,
    seed: u64,
) -> Result<ProbeDataset> {
    if pair_ids.len() != labels.len() {
        return Err(Error::Shape(format!("{} pairs vs {} labels", pair_ids.len(), labels.len())));
    }
    if n_bins < 2 {
        return Err(Error::Config("n_bins must be at least 2".into()));
    }
    if per_bin == 0 {
        return Err(Error::Config("per_bin must be positive".into()));
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("labels"));
    }
    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::DegenerateLabels);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut bin_edges: Vec<f64> = (0..n_bins).map(|i| lo + width * i as f64).collect();
    bin_edges.push(hi);

    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &v) in labels.iter().enumerate() {
        bins[bin_index(v, lo, hi, n_bins)].push(i);
    }
    if bins.iter().filter(|b| !b.is_empty()).count() < 2 {
        return Err(Error::DegenerateLabels);
    }

    let mut rng = rng::seeded(seed);
    let mut chosen = Vec::new();
    for members in &bins {
        if members.len() <= per_bin {
            chosen.extend_from_slice(members);
        } else {
            chosen.extend(members.choose_multiple(&mut rng, per_bin).copied());
        }
    }
    chosen.sort_unstable();

    Ok(ProbeDataset {
        pair_ids: chosen.iter().map(|&i| pair_ids[i].to_string()).collect(),
        labels: chosen.iter().map(|&i| labels[i]).collect(),
        feature_name: feature_name.to_string(),
        bin_edges,
        seed,
    })
}

/// Train/validation/test fractions plus the permutation seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_frac: 0.6, val_frac: 0.2, test_frac: 0.2, seed: 0 }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let s = Self { train_frac, val_frac, test_frac, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Config(format!("split fractions must lie in (0,1): {fracs:?}")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// (train, val, test) sizes for `n` items: val and test are floored,
    /// train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 0.2 * 100.
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let val = floor(self.val_frac);
        let test = floor(self.test_frac);
        (n - val - test, val, test)
    }
}

/// Index partition produced by [`split_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_dataset(dataset: &ProbeDataset, spec: &SplitSpec) -> Result<Split> {
    split_indices(dataset.len(), spec)
}

/// Seeded permutation of `0..n` cut into train/val/test.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let (n_train, n_val, _) = spec.sizes(n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(spec.seed));
    let test = perm.split_off(n_train + n_val);
    let val = perm.split_off(n_train);
    Ok(Split { train: perm, val, test })
}

/// Synthetic retrieval corpus for desk-scale runs.
///
/// Each query gets its own pool of documents whose query-term density varies
/// smoothly from none to heavy, so statistical features span a wide range.
#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub queries: Vec<(String, String)>,
    pub docs: Vec<(String, String)>,
    /// (qid, docid, rank, score)
    pub run: Vec<(String, String, u32, f64)>,
}

impl DemoCorpus {
    pub fn generate(seed: u64, n_queries: usize, docs_per_query: usize) -> Self {
        const VOCAB: usize = 5000;
        let mut rng = rng::seeded(seed);
        // Zipf-like background distribution over the vocabulary.
        let mut cdf = Vec::with_capacity(VOCAB);
        let mut acc = 0.0;
        for r in 0..VOCAB {
            acc += 1.0 / (r as f64 + 1.0);
            cdf.push(acc);
        }
        let word = |r: usize| format!("w{r}");
        let sample_bg = |rng: &mut rand_chacha::ChaCha8Rng| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c < u).min(VOCAB - 1)
        };

        let mut queries = Vec::with_capacity(n_queries);
        let mut docs = Vec::with_capacity(n_queries * docs_per_query);
        let mut run = Vec::with_capacity(n_queries * docs_per_query);
        for q in 0..n_queries {
            let qid = format!("q{q}");
            let n_terms = rng.random_range(2..=5);
            let terms: Vec<usize> = (0..n_terms).map(|_| rng.random_range(20..2000)).collect();
            let qtext = terms.iter().map(|&t| word(t)).collect::<Vec<_>>().join(" ");
            queries.push((qid.clone(), qtext));

            let mut scored = Vec::with_capacity(docs_per_query);
            for d in 0..docs_per_query {
                let docid = format!("d{q}_{d}");
                let density: f64 = rng.random::<f64>().powf(1.5) * 0.35;
                let len = rng.random_range(15..=150);
                let mut toks = Vec::with_capacity(len);
                let mut hits = 0usize;
                for _ in 0..len {
                    if rng.random::<f64>() < density {
                        toks.push(word(terms[rng.random_range(0..terms.len())]));
                        hits += 1;
                    } else {
                        toks.push(word(sample_bg(&mut rng)));
                    }
                }
                let text = toks.join(" ");
                scored.push((docid.clone(), hits as f64 / len as f64));
                docs.push((docid, text));
            }
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            for (rank, (docid, score)) in scored.into_iter().enumerate() {
                run.push((qid.clone(), docid, rank as u32 + 1, score));
            }
        }
        Self { queries, docs, run }
    }

    /// Writes `queries.tsv`, `collection.tsv`, and `run.trec` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let table = |rows: &[(String, String)]| {
            let mut s = String::new();
            for (id, text) in rows {
                let _ = writeln!(s, "{id}\t{text}");
            }
            s
        };
        let mut run = String::new();
        for (q, d, rank, score) in &self.run {
            let _ = writeln!(run, "{q} Q0 {d} {rank} {score:.6} demo");
        }
        for (name, body) in
            [("queries.tsv", table(&self.queries)), ("collection.tsv", table(&self.docs)), ("run.trec", run)]
        {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    pub fn pair_set(&self) -> Result<PairSet> {
        let queries: HashMap<_, _> = self.queries.iter().cloned().collect();
        let docs: HashMap<_, _> = self.docs.iter().cloned().collect();
        let run: Vec<RunEntry> =
            self.run.iter().map(|(q, d, r, _)| RunEntry { qid: q.clone(), docid: d.clone(), rank: Some(*r) }).collect();
        pairs_from_run(&run, &queries, &docs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn tiny_files(dir: &Path, run: &str) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let r = write(dir, "run", run);
        let q = write(dir, "q.tsv", "1\tcat food\n2\tdog toys\n");
        let c = write(dir, "c.tsv", "a\tthe cat ate food\nb\tcat\nc\tfood\nd\tdog\ne\ttoys for dogs\nf\tdog toys\n");
        (r, q, c)
    }

    #[test]
    fn loads_two_queries_three_docs() {
        let dir = tempfile::tempdir().unwrap();
        let (r, q, c) = tiny_files(
            dir.path(),
            "1 Q0 a 1 3.0 x\n1 Q0 b 2 2.0 x\n1 Q0 c 3 1.0 x\n2 Q0 d 1 3.0 x\n2 Q0 e 2 2.0 x\n2 Q0 f 3 1.0 x\n",
        );
        let ps = load_run(&r, &q, &c).unwrap();
        assert_eq!(ps.len(), 6);
        assert_eq!(ps.per_query_corpus().len(), 2);
        assert!(ps.per_query_corpus().values().all(|v| v.len() == 3));
        assert_eq!(ps.per_query_corpus()["1"], vec!["a", "b", "c"]);
    }

    #[test]
    fn two_column_runs_and_rank_order() {
        let dir = tempfile::tempdir().unwrap();
        let (r, q, c) = tiny_files(dir.path(), "1 c\n1 a\n2 d\n");
        let ps = load_run(&r, &q, &c).unwrap();
        assert_eq!(ps.per_query_corpus()["1"], vec!["c", "a"]);

        let (r, q, c) = tiny_files(dir.path(), "1 Q0 b 2 1.0 x\n1 Q0 a 1 2.0 x\n");
        let ps = load_run(&r, &q, &c).unwrap();
        assert_eq!(ps.per_query_corpus()["1"], vec!["a", "b"]);
    }

    #[test]
    fn unresolved_doc_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let (r, q, c) = tiny_files(dir.path(), "1 Q0 a 1 1 x\n1 Q0 zz9 2 1 x\n1 Q0 zz8 3 1 x\n");
        let err = load_run(&r, &q, &c).unwrap_err();
        assert!(matches!(&err, Error::UnresolvedId(id) if id == "zz9"), "{err}");
    }

    #[test]
    fn duplicate_run_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (r, q, c) = tiny_files(dir.path(), "1 a\n1 a\n");
        assert!(matches!(load_run(&r, &q, &c), Err(Error::Duplicate(_))));
    }

    #[test]
    fn malformed_run_line() {
        let dir = tempfile::tempdir().unwrap();
        let (r, q, c) = tiny_files(dir.path(), "1 Q0 a\n");
        assert!(matches!(load_run(&r, &q, &c), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn balanced_uniform_labels() {
        let ids: Vec<String> = (0..400).map(|i| format!("p{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let labels: Vec<f64> = (0..400).map(|i| i as f64 / 399.0).collect();
        let ds = balance_labels(&refs, &labels, "x", 4, 10, 3).unwrap();
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.bin_counts(), vec![10, 10, 10, 10]);
        assert_eq!(ds.bin_edges.len(), 5);
    }

    #[test]
    fn constant_labels_are_degenerate() {
        let refs = ["a", "b", "c"];
        let err = balance_labels(&refs, &[2.0; 3], "x", 4, 10, 0).unwrap_err();
        assert_eq!(err.to_string(), "degenerate label distribution");
    }

    #[test]
    fn non_finite_label_rejected() {
        let refs = ["a", "b"];
        assert!(matches!(balance_labels(&refs, &[1.0, f64::NAN], "x", 2, 1, 0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn split_sizes() {
        let s = SplitSpec { seed: 7, ..SplitSpec::default() };
        let sp = split_indices(100, &s).unwrap();
        assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), (60, 20, 20));
        assert_eq!(s.sizes(5), (3, 1, 1));
    }

    #[test]
    fn split_determinism() {
        let s = SplitSpec { seed: 7, ..SplitSpec::default() };
        assert_eq!(split_indices(50, &s).unwrap(), split_indices(50, &s).unwrap());
        let t = SplitSpec { seed: 8, ..s };
        assert_ne!(split_indices(50, &s).unwrap(), split_indices(50, &t).unwrap());
    }

    #[test]
    fn bad_split_spec() {
        assert!(SplitSpec::new(0.6, 0.2, 0.3, 0).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0, 0).is_err());
        assert!(SplitSpec::new(0.5, 0.25, 0.25, 0).is_ok());
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let refs = ["a", "b", "c", "d"];
        let ds = balance_labels(&refs, &[0.0, 0.1, 0.7, 1.0], "bm25", 2, 5, 9).unwrap();
        let p = dir.path().join("bm25.csv");
        ds.write(&p).unwrap();
        assert_eq!(ProbeDataset::read(&p).unwrap(), ds);
    }

    #[test]
    fn demo_corpus_is_loadable() {
        let demo = DemoCorpus::generate(1, 3, 10);
        let dir = tempfile::tempdir().unwrap();
        demo.write(dir.path()).unwrap();
        let ps =
            load_run(&dir.path().join("run.trec"), &dir.path().join("queries.tsv"), &dir.path().join("collection.tsv"))
                .unwrap();
        assert_eq!(ps.len(), 30);
        assert_eq!(ps.pairs()[0].pair_id, demo.pair_set().unwrap().pairs()[0].pair_id);
    }

    proptest! {
        #[test]
        fn balance_invariant(labels in prop::collection::vec(-50.0f64..50.0, 2..300),
                             n_bins in 2usize..12, per_bin in 1usize..20, seed in any::<u64>()) {
            prop_assume!(labels.iter().any(|&v| v != labels[0]));
            let ids: Vec<String> = (0..labels.len()).map(|i| i.to_string()).collect();
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let ds = balance_labels(&refs, &labels, "f", n_bins, per_bin, seed).unwrap();
            // Candidate counts per bin decide which bins the invariant covers.
            let full = ProbeDataset { labels: labels.clone(), ..ds.clone() }.bin_counts();
            let got = ds.bin_counts();
            let covered: Vec<usize> = full.iter().zip(&got)
                .filter(|(f, _)| **f >= per_bin).map(|(_, g)| *g).collect();
            if let (Some(mx), Some(mn)) = (covered.iter().max(), covered.iter().min()) {
                prop_assert!(mx - mn <= 1);
            }
            for (f, g) in full.iter().zip(&got) {
                prop_assert_eq!(*g, (*f).min(per_bin));
            }
            let again = balance_labels(&refs, &labels, "f", n_bins, per_bin, seed).unwrap();
            prop_assert_eq!(ds, again);
        }

        #[test]
        fn split_partitions(n in 3usize..500, seed in any::<u64>()) {
            let s = SplitSpec { seed, ..SplitSpec::default() };
            let sp = split_indices(n, &s).unwrap();
            let mut all: Vec<usize> = sp.train.iter().chain(&sp.val).chain(&sp.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
