// SPDX-License-Identifier: MIT OR Apache-2.0

//! Statistical IR feature labels for query-document pairs.
//!
//! Covers the MSLR content-feature grid ({min, max, mean, var, sum} over
//! tf, tf/L, tf*idf), query-term coverage, stream length, Okapi BM25, five
//! query-document distance metrics, and arithmetic groups of these.

mod bm25;
mod distance;
mod group;
mod mslr;
mod stats;
mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bm25::{bm25, okapi_idf, Bm25Params};
pub use distance::{distance_metric, DistanceMetric, SMOOTHING_EPS};
pub use group::{group_value, group_values, min_max_normalize, FeatureGroupExpr};
pub use mslr::{aggregate_feature, mslr_feature, Aggregate, MslrFeature, TermQuantity};
pub use stats::{idf, term_stats, CorpusStats, TermStat, TermStatVector};
pub use tokenize::{tokenize, TokenStream};

use crate::corpus::PairSet;
use crate::error::{Error, Result};

/// Any feature this module can compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureId {
    Mslr(MslrFeature),
    Distance(DistanceMetric),
}

impl FeatureId {
    /// The 19 MSLR features followed by the 5 distance metrics.
    pub fn all() -> Vec<FeatureId> {
        MslrFeature::all()
            .into_iter()
            .map(FeatureId::Mslr)
            .chain(DistanceMetric::ALL.into_iter().map(FeatureId::Distance))
            .collect()
    }

    pub fn name(self) -> String {
        match self {
            FeatureId::Mslr(f) => f.name(),
            FeatureId::Distance(m) => m.name().to_string(),
        }
    }

    /// Resolves a canonical name or short alias, case-insensitively.
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        for f in MslrFeature::all() {
            if f.name() == lower || f.alias().to_ascii_lowercase() == lower {
                return Ok(FeatureId::Mslr(f));
            }
        }
        if let Some(m) = DistanceMetric::ALL.into_iter().find(|m| m.name() == lower) {
            return Ok(FeatureId::Distance(m));
        }
        Err(Error::UnknownFeature {
            name: name.to_string(),
            valid: Self::all().iter().map(|f| f.name()).collect::<Vec<_>>().join(", "),
        })
    }

    pub fn compute(
        self,
        query: &TokenStream,
        doc: &TokenStream,
        stats: &CorpusStats,
        params: &Bm25Params,
    ) -> Result<f64> {
        match self {
            FeatureId::Mslr(f) => mslr_feature(f, query, doc, stats, params),
            FeatureId::Distance(m) => distance_metric(m, query, doc, stats),
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Tokenized pairs with per-query corpus statistics, ready for feature maps.
pub struct PreparedPairs {
    pair_ids: Vec<String>,
    queries: Vec<TokenStream>,
    docs: Vec<TokenStream>,
    stats_idx: Vec<usize>,
    stats: Vec<CorpusStats>,
}

impl PreparedPairs {
    pub fn new(pairs: &PairSet) -> Result<Self> {
        let ps = pairs.pairs();
        let queries: Vec<TokenStream> = ps.par_iter().map(|p| tokenize(&p.query_text)).collect();
        let docs: Vec<TokenStream> = ps.par_iter().map(|p| tokenize(&p.doc_text)).collect();
        let by_doc: HashMap<(&str, &str), usize> =
            ps.iter().enumerate().map(|(i, p)| ((p.query_id.as_str(), p.doc_id.as_str()), i)).collect();

        let mut stats = Vec::new();
        let mut stats_of_query: HashMap<&str, usize> = HashMap::new();
        for (qid, doc_ids) in pairs.per_query_corpus() {
            let corpus_docs = doc_ids.iter().map(|d| {
                by_doc.get(&(qid.as_str(), d.as_str())).map(|&i| &docs[i]).ok_or_else(|| Error::UnresolvedId(d.clone()))
            });
            let corpus_docs: Vec<&TokenStream> = corpus_docs.collect::<Result<_>>()?;
            stats_of_query.insert(qid.as_str(), stats.len());
            stats.push(CorpusStats::from_docs(qid, corpus_docs)?);
        }
        let stats_idx = ps.iter().map(|p| stats_of_query[p.query_id.as_str()]).collect();
        Ok(Self { pair_ids: ps.iter().map(|p| p.pair_id.clone()).collect(), queries, docs, stats_idx, stats })
    }

    pub fn pair_ids(&self) -> &[String] {
        &self.pair_ids
    }

    /// One value per pair, in pair order.
    pub fn compute(&self, feature: FeatureId, params: &Bm25Params) -> Result<Vec<f64>> {
        (0..self.pair_ids.len())
            .into_par_iter()
            .map(|i| {
                feature.compute(&self.queries[i], &self.docs[i], &self.stats[self.stats_idx[i]], params).map_err(|e| {
                    match e {
                        Error::EmptyStream | Error::EmptyQuery => {
                            Error::Config(format!("pair `{}`: {e}", self.pair_ids[i]))
                        }
                        e => e,
                    }
                })
            })
            .collect()
    }
}

/// Computes each requested feature over every pair.
pub fn compute_features(pairs: &PairSet, features: &[FeatureId], params: &Bm25Params) -> Result<Vec<Vec<f64>>> {
    let prepared = PreparedPairs::new(pairs)?;
    features.iter().map(|f| prepared.compute(*f, params)).collect()
}

/// Labels for one feature, aligned with pair ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelColumn {
    pub feature_name: String,
    pub pair_ids: Vec<String>,
    pub values: Vec<f64>,
}

impl LabelColumn {
    /// Writes CSV `pair_id,feature_name,value`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::from("pair_id,feature_name,value\n");
        for (id, v) in self.pair_ids.iter().zip(&self.values) {
            let _ = writeln!(out, "{id},{},{v}", self.feature_name);
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a label CSV. All rows must carry the same feature name.
    /// Two-column `pair_id,label` dataset files are accepted too; their
    /// feature name is taken from the file stem.
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse { path: path.into(), line: 0, msg: format!("{other:?}") },
        })?;
        let n_cols = rdr.headers()?.len();
        let mut feature_name: Option<String> = None;
        let mut pair_ids = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| Error::Parse { path: path.into(), line: i + 2, msg };
            let (id, name, raw) = match (n_cols, rec.len()) {
                (3, 3) => (&rec[0], Some(&rec[1]), &rec[2]),
                (2, 2) => (&rec[0], None, &rec[1]),
                (_, n) => return Err(bad(format!("unexpected column count {n}"))),
            };
            let v: f64 = raw.trim().parse().map_err(|_| bad(format!("bad value `{raw}`")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value `{raw}`")));
            }
            if let Some(name) = name {
                match &feature_name {
                    None => feature_name = Some(name.to_string()),
                    Some(f) if f != name => return Err(bad(format!("mixed feature names `{f}` and `{name}`"))),
                    _ => {}
                }
            }
            pair_ids.push(id.to_string());
            values.push(v);
        }
        let feature_name =
            feature_name.or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned())).unwrap_or_default();
        Ok(Self { feature_name, pair_ids, values })
    }
}
