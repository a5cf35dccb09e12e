// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{bm25, term_stats, Bm25Params, CorpusStats, TermStatVector, TokenStream};
use crate::error::Result;

/// Aggregate taken over the unique query terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Aggregate {
    Min,
    Max,
    Mean,
    Var,
    Sum,
}

/// Per-term quantity being aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TermQuantity {
    /// Raw term frequency.
    Tf,
    /// Term frequency over stream length.
    TfL,
    /// Term frequency times smoothed idf.
    TfIdf,
}

/// The 19 MSLR-style content features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MslrFeature {
    Term(Aggregate, TermQuantity),
    CoveredQtNumber,
    CoveredQtRatio,
    StreamLength,
    Bm25,
}

impl Aggregate {
    pub const ALL: [Aggregate; 5] = [Aggregate::Min, Aggregate::Max, Aggregate::Mean, Aggregate::Var, Aggregate::Sum];

    fn name(self) -> &'static str {
        match self {
            Aggregate::Min => "min",
            Aggregate::Max => "max",
            Aggregate::Mean => "mean",
            Aggregate::Var => "var",
            Aggregate::Sum => "sum",
        }
    }

    /// Applies the aggregate; variance is the population variance.
    pub fn apply(self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        match self {
            Aggregate::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregate::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Sum => xs.iter().sum(),
            Aggregate::Mean => xs.iter().sum::<f64>() / n,
            Aggregate::Var => {
                let mean = xs.iter().sum::<f64>() / n;
                xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
            }
        }
    }
}

impl TermQuantity {
    pub const ALL: [TermQuantity; 3] = [TermQuantity::Tf, TermQuantity::TfL, TermQuantity::TfIdf];

    fn name(self) -> &'static str {
        match self {
            TermQuantity::Tf => "tf",
            TermQuantity::TfL => "tfl",
            TermQuantity::TfIdf => "tfidf",
        }
    }
}

impl MslrFeature {
    /// All 19 features: the aggregate grid, then coverage, length, BM25.
    pub fn all() -> Vec<MslrFeature> {
        let mut v: Vec<MslrFeature> = TermQuantity::ALL
            .iter()
            .flat_map(|q| Aggregate::ALL.iter().map(move |a| MslrFeature::Term(*a, *q)))
            .collect();
        v.extend([
            MslrFeature::CoveredQtNumber,
            MslrFeature::CoveredQtRatio,
            MslrFeature::StreamLength,
            MslrFeature::Bm25,
        ]);
        v
    }

    /// Canonical snake_case name, e.g. `var_tfidf`.
    pub fn name(self) -> String {
        match self {
            MslrFeature::Term(a, q) => format!("{}_{}", a.name(), q.name()),
            MslrFeature::CoveredQtNumber => "covered_qt_number".into(),
            MslrFeature::CoveredQtRatio => "covered_qt_ratio".into(),
            MslrFeature::StreamLength => "stream_length".into(),
            MslrFeature::Bm25 => "bm25".into(),
        }
    }

    /// Short upper-case alias used in group expressions (`QTR`, `STF`, `VTFIDF`).
    pub fn alias(self) -> String {
        match self {
            MslrFeature::Term(a, q) => {
                let prefix = match a {
                    Aggregate::Min => "MIN",
                    Aggregate::Max => "MAX",
                    Aggregate::Mean => "MEAN",
                    Aggregate::Var => "V",
                    Aggregate::Sum => "S",
                };
                format!("{prefix}{}", q.name().to_ascii_uppercase())
            }
            MslrFeature::CoveredQtNumber => "QTN".into(),
            MslrFeature::CoveredQtRatio => "QTR".into(),
            MslrFeature::StreamLength => "SL".into(),
            MslrFeature::Bm25 => "BM25".into(),
        }
    }
}

impl fmt::Display for MslrFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Evaluates every feature except BM25 from a precomputed term-stat vector.
pub fn aggregate_feature(feature: MslrFeature, stats: &TermStatVector, doc_len: usize) -> Option<f64> {
    let v = match feature {
        MslrFeature::Term(agg, q) => {
            let xs: Vec<f64> = stats
                .iter()
                .map(|t| match q {
                    TermQuantity::Tf => t.tf,
                    TermQuantity::TfL => t.tfl,
                    TermQuantity::TfIdf => t.tfidf,
                })
                .collect();
            agg.apply(&xs)
        }
        MslrFeature::CoveredQtNumber => covered(stats) as f64,
        MslrFeature::CoveredQtRatio => covered(stats) as f64 / stats.len() as f64,
        MslrFeature::StreamLength => doc_len as f64,
        MslrFeature::Bm25 => return None,
    };
    Some(v)
}

fn covered(stats: &TermStatVector) -> usize {
    stats.iter().filter(|t| t.tf > 0.0).count()
}

/// Computes one MSLR feature for a query-document pair. BM25 uses the
/// corpus average document length.
pub fn mslr_feature(
    feature: MslrFeature,
    query: &TokenStream,
    doc: &TokenStream,
    stats: &CorpusStats,
    params: &Bm25Params,
) -> Result<f64> {
    let ts = term_stats(query, doc, stats)?;
    match aggregate_feature(feature, &ts, doc.len()) {
        Some(v) => Ok(v),
        None => bm25(query, doc, stats, stats.avg_doc_len(), params),
    }
}
