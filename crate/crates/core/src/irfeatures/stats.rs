// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::TokenStream;
use crate::error::{Error, Result};

/// Document frequencies over one query's retrieved corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub query_id: String,
    n_docs: usize,
    doc_freq: HashMap<String, usize>,
    avg_doc_len: f64,
}

impl CorpusStats {
    pub fn from_docs<'a>(query_id: &str, docs: impl IntoIterator<Item = &'a TokenStream>) -> Result<Self> {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut n_docs = 0usize;
        let mut total_len = 0usize;
        for d in docs {
            n_docs += 1;
            total_len += d.len();
            let uniq: HashSet<&str> = d.tokens().iter().map(String::as_str).collect();
            for t in uniq {
                *doc_freq.entry(t.to_string()).or_default() += 1;
            }
        }
        if n_docs == 0 {
            return Err(Error::Empty("corpus"));
        }
        Ok(Self { query_id: query_id.to_string(), n_docs, doc_freq, avg_doc_len: total_len as f64 / n_docs as f64 })
    }

    /// Explicit construction; enforces `1 <= df <= n_docs`.
    pub fn from_counts(
        query_id: &str,
        n_docs: usize,
        doc_freq: HashMap<String, usize>,
        avg_doc_len: f64,
    ) -> Result<Self> {
        if n_docs == 0 {
            return Err(Error::Empty("corpus"));
        }
        if let Some((t, df)) = doc_freq.iter().find(|(_, &df)| df == 0 || df > n_docs) {
            return Err(Error::Config(format!("df({t}) = {df} outside 1..={n_docs}")));
        }
        Ok(Self { query_id: query_id.to_string(), n_docs, doc_freq, avg_doc_len })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Mean document length over the corpus (BM25's `avgdl`).
    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }
}

/// Smoothed idf: `ln((N + 1) / (df + 1)) + 1`. Never below 1.
pub fn idf(term: &str, stats: &CorpusStats) -> f64 {
    let n = stats.n_docs() as f64;
    let df = stats.df(term) as f64;
    ((n + 1.0) / (df + 1.0)).ln() + 1.0
}

/// Per-term statistics of one unique query term against a document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermStat {
    pub term: String,
    pub tf: f64,
    pub tfl: f64,
    pub tfidf: f64,
}

/// One entry per unique query term, first-occurrence order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermStatVector(pub Vec<TermStat>);

impl TermStatVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TermStat> {
        self.0.iter()
    }
}

pub fn term_stats(query: &TokenStream, doc: &TokenStream, stats: &CorpusStats) -> Result<TermStatVector> {
    if doc.is_empty() {
        return Err(Error::EmptyStream);
    }
    let terms = query.unique_terms();
    if terms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut counts: HashMap<&str, usize> = terms.iter().map(|t| (*t, 0)).collect();
    for t in doc.tokens() {
        if let Some(c) = counts.get_mut(t.as_str()) {
            *c += 1;
        }
    }
    let len = doc.len() as f64;
    let out = terms
        .into_iter()
        .map(|t| {
            let tf = counts[t] as f64;
            TermStat { term: t.to_string(), tf, tfl: tf / len, tfidf: tf * idf(t, stats) }
        })
        .collect();
    Ok(TermStatVector(out))
}
