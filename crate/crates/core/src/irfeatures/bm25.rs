// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusStats, TokenStream};
use crate::error::{Error, Result};

/// Okapi BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) || !(0.0..=1.0).contains(&b) {
            return Err(Error::Config(format!("invalid BM25 params k1={k1} b={b}")));
        }
        Ok(Self { k1, b })
    }
}

/// Okapi idf: `ln(1 + (N - df + 0.5) / (df + 0.5))`.
pub fn okapi_idf(term: &str, stats: &CorpusStats) -> f64 {
    let n = stats.n_docs() as f64;
    let df = stats.df(term) as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Okapi BM25 summed over unique query terms.
pub fn bm25(
    query: &TokenStream,
    doc: &TokenStream,
    stats: &CorpusStats,
    avgdl: f64,
    params: &Bm25Params,
) -> Result<f64> {
    if !(avgdl > 0.0 && avgdl.is_finite()) {
        return Err(Error::Config(format!("avgdl must be positive, got {avgdl}")));
    }
    let terms = query.unique_terms();
    let mut tf: HashMap<&str, f64> = terms.iter().map(|t| (*t, 0.0)).collect();
    for t in doc.tokens() {
        if let Some(c) = tf.get_mut(t.as_str()) {
            *c += 1.0;
        }
    }
    let norm = params.k1 * (1.0 - params.b + params.b * doc.len() as f64 / avgdl);
    let score = terms
        .iter()
        .map(|t| {
            let f = tf[t];
            if f == 0.0 {
                0.0
            } else {
                okapi_idf(t, stats) * f * (params.k1 + 1.0) / (f + norm)
            }
        })
        .sum();
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(n: usize, dfs: &[(&str, usize)], avg: f64) -> CorpusStats {
        let m = dfs.iter().map(|(t, d)| (t.to_string(), *d)).collect();
        CorpusStats::from_counts("q", n, m, avg).unwrap()
    }

    #[test]
    fn no_overlap_scores_zero() {
        let s = stats(10, &[("a", 3)], 4.0);
        let v =
            bm25(&TokenStream::tokenize("a"), &TokenStream::tokenize("b c"), &s, 4.0, &Bm25Params::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_term_hand_value() {
        let s = stats(2, &[("a", 1)], 1.0);
        let v =
            bm25(&TokenStream::tokenize("a"), &TokenStream::tokenize("a"), &s, 1.0, &Bm25Params::default()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn saturates_under_tf_doubling() {
        let s = stats(10, &[("a", 2), ("b", 5)], 6.0);
        let q = TokenStream::tokenize("a b");
        let d = TokenStream::tokenize("a b x y z w");
        let d2 = TokenStream::tokenize("a a b b x y z w");
        let p = Bm25Params { k1: 1.2, b: 0.0 };
        let s1 = bm25(&q, &d, &s, 6.0, &p).unwrap();
        let s2 = bm25(&q, &d2, &s, 6.0, &p).unwrap();
        assert!(s2 > s1 && s2 < 2.0 * s1);
    }

    #[test]
    fn rejects_bad_avgdl_and_params() {
        let s = stats(2, &[], 1.0);
        let q = TokenStream::tokenize("a");
        assert!(bm25(&q, &q, &s, 0.0, &Bm25Params::default()).is_err());
        assert!(Bm25Params::new(0.0, 0.5).is_err());
        assert!(Bm25Params::new(1.0, 1.5).is_err());
    }
}
