// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{idf, CorpusStats, TokenStream};
use crate::error::{Error, Result};

/// Additive smoothing applied to term distributions before KL/JS.
pub const SMOOTHING_EPS: f64 = 1e-9;

/// Statistical query-document distance metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistanceMetric {
    Cosine,
    Euclidean,
    Manhattan,
    Kl,
    Js,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 5] = [
        DistanceMetric::Cosine,
        DistanceMetric::Euclidean,
        DistanceMetric::Manhattan,
        DistanceMetric::Kl,
        DistanceMetric::Js,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Cosine => "cosine",
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Manhattan => "manhattan",
            DistanceMetric::Kl => "kl",
            DistanceMetric::Js => "js",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        DistanceMetric::ALL.into_iter().find(|m| m.name() == lower).ok_or_else(|| Error::UnknownFeature {
            name: s.to_string(),
            valid: DistanceMetric::ALL.map(|m| m.name()).join(", "),
        })
    }
}

fn counts(s: &TokenStream) -> BTreeMap<&str, f64> {
    let mut m = BTreeMap::new();
    for t in s.tokens() {
        *m.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    m
}

/// Aligned per-term vectors over the sorted union vocabulary of a pair.
struct PairVectors {
    q_tf: Vec<f64>,
    d_tf: Vec<f64>,
    idf: Vec<f64>,
}

impl PairVectors {
    fn build(query: &TokenStream, doc: &TokenStream, stats: &CorpusStats) -> Self {
        let qc = counts(query);
        let dc = counts(doc);
        let mut vocab: Vec<&str> = qc.keys().chain(dc.keys()).copied().collect();
        vocab.sort_unstable();
        vocab.dedup();
        Self {
            q_tf: vocab.iter().map(|t| qc.get(t).copied().unwrap_or(0.0)).collect(),
            d_tf: vocab.iter().map(|t| dc.get(t).copied().unwrap_or(0.0)).collect(),
            idf: vocab.iter().map(|t| idf(t, stats)).collect(),
        }
    }
}

/// Smoothed, renormalized term-probability distribution from raw counts.
fn smoothed_distribution(tf: &[f64]) -> Vec<f64> {
    let total: f64 = tf.iter().sum();
    let z = 1.0 + SMOOTHING_EPS * tf.len() as f64;
    tf.iter().map(|c| (c / total + SMOOTHING_EPS) / z).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

/// Distance or similarity between the query and document term profiles.
///
/// Cosine, Euclidean, and Manhattan use tf*idf vectors over the pair's union
/// vocabulary. KL (`D(q || d)`) and JS use smoothed term-probability
/// distributions built from raw term counts.
pub fn distance_metric(
    metric: DistanceMetric,
    query: &TokenStream,
    doc: &TokenStream,
    stats: &CorpusStats,
) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if doc.is_empty() {
        return Err(Error::EmptyStream);
    }
    let v = PairVectors::build(query, doc, stats);
    let q: Vec<f64> = v.q_tf.iter().zip(&v.idf).map(|(c, w)| c * w).collect();
    let d: Vec<f64> = v.d_tf.iter().zip(&v.idf).map(|(c, w)| c * w).collect();
    let value = match metric {
        DistanceMetric::Cosine => {
            let dot: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
            let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nd = d.iter().map(|a| a * a).sum::<f64>().sqrt();
            (dot / (nq * nd)).clamp(0.0, 1.0)
        }
        DistanceMetric::Euclidean => q.iter().zip(&d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        DistanceMetric::Manhattan => q.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum(),
        DistanceMetric::Kl => kl(&smoothed_distribution(&v.q_tf), &smoothed_distribution(&v.d_tf)),
        DistanceMetric::Js => {
            let p = smoothed_distribution(&v.q_tf);
            let r = smoothed_distribution(&v.d_tf);
            let m: Vec<f64> = p.iter().zip(&r).map(|(a, b)| 0.5 * (a + b)).collect();
            (0.5 * kl(&p, &m) + 0.5 * kl(&r, &m)).min(std::f64::consts::LN_2)
        }
    };
    Ok(value)
}
