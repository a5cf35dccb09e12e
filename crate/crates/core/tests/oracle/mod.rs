// SPDX-License-Identifier: MIT OR Apache-2.0

//! Naive reference implementations of the IR features, written directly
//! from their definitions over plain token vectors. Shared by test targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankprobe::irfeatures::{Bm25Params, CorpusStats, FeatureId, TokenStream};

pub const REL_TOL: f64 = 1e-9;
pub const EPS: f64 = 1e-9;

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * b.abs().max(1.0)
}

/// A query, one scored document, and the query's retrieved corpus (which
/// contains the document).
#[derive(Debug, Clone)]
pub struct Instance {
    pub query: Vec<String>,
    pub doc: Vec<String>,
    pub corpus: Vec<Vec<String>>,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let vocab = rng.random_range(1..=20);
        let word = |r: &mut ChaCha8Rng| format!("t{}", r.random_range(0..vocab));
        let stream = |r: &mut ChaCha8Rng, max: usize| -> Vec<String> {
            let n = r.random_range(1..=max);
            (0..n).map(|_| word(r)).collect()
        };
        let query = stream(rng, 6);
        let n_docs = rng.random_range(1..=8);
        let corpus: Vec<Vec<String>> = (0..n_docs).map(|_| stream(rng, 30)).collect();
        let doc = corpus[rng.random_range(0..n_docs)].clone();
        Self { query, doc, corpus }
    }

    pub fn stats(&self) -> CorpusStats {
        let docs: Vec<TokenStream> = self.corpus.iter().map(|d| TokenStream::from_terms(d)).collect();
        CorpusStats::from_docs("q", docs.iter()).unwrap()
    }

    pub fn compute(&self, f: FeatureId, params: &Bm25Params) -> f64 {
        f.compute(&TokenStream::from_terms(&self.query), &TokenStream::from_terms(&self.doc), &self.stats(), params)
            .unwrap()
    }

    fn n(&self) -> f64 {
        self.corpus.len() as f64
    }

    fn df(&self, t: &str) -> f64 {
        self.corpus.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64
    }

    fn avgdl(&self) -> f64 {
        self.corpus.iter().map(|d| d.len() as f64).sum::<f64>() / self.n()
    }

    fn tf(&self, t: &str) -> f64 {
        self.doc.iter().filter(|x| *x == t).count() as f64
    }

    fn unique_query(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.query {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    fn idf(&self, t: &str) -> f64 {
        ((self.n() + 1.0) / (self.df(t) + 1.0)).ln() + 1.0
    }

    fn quantity(&self, q: &str) -> Vec<f64> {
        let len = self.doc.len() as f64;
        self.unique_query()
            .iter()
            .map(|t| match q {
                "tf" => self.tf(t),
                "tfl" => self.tf(t) / len,
                "tfidf" => self.tf(t) * self.idf(t),
                _ => unreachable!(),
            })
            .collect()
    }

    fn bm25(&self, p: &Bm25Params) -> f64 {
        let mut s = 0.0;
        for t in self.unique_query() {
            let f = self.tf(&t);
            if f == 0.0 {
                continue;
            }
            let df = self.df(&t);
            let idf = (1.0 + (self.n() - df + 0.5) / (df + 0.5)).ln();
            let denom = f + p.k1 * (1.0 - p.b + p.b * self.doc.len() as f64 / self.avgdl());
            s += idf * f * (p.k1 + 1.0) / denom;
        }
        s
    }

    fn vocab(&self) -> Vec<String> {
        let mut v: Vec<String> = self.query.iter().chain(&self.doc).cloned().collect();
        v.sort();
        v.dedup();
        v
    }

    fn count(stream: &[String], t: &str) -> f64 {
        stream.iter().filter(|x| *x == t).count() as f64
    }

    fn weighted(&self, stream: &[String]) -> Vec<f64> {
        self.vocab().iter().map(|t| Self::count(stream, t) * self.idf(t)).collect()
    }

    fn smoothed(&self, stream: &[String]) -> Vec<f64> {
        let v = self.vocab();
        let total = stream.len() as f64;
        let raw: Vec<f64> = v.iter().map(|t| Self::count(stream, t) / total + EPS).collect();
        let z: f64 = raw.iter().sum();
        raw.iter().map(|x| x / z).collect()
    }

    /// The reference value of a feature, looked up by canonical name.
    pub fn oracle(&self, name: &str, p: &Bm25Params) -> f64 {
        if let Some((agg, q)) = name.split_once('_') {
            if matches!(q, "tf" | "tfl" | "tfidf") {
                let xs = self.quantity(q);
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                return match agg {
                    "min" => xs.iter().copied().fold(f64::INFINITY, f64::min),
                    "max" => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    "mean" => mean,
                    "var" => xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n,
                    "sum" => xs.iter().sum(),
                    _ => unreachable!("{name}"),
                };
            }
        }
        let uq = self.unique_query();
        let covered = uq.iter().filter(|t| self.tf(t) > 0.0).count() as f64;
        match name {
            "covered_qt_number" => covered,
            "covered_qt_ratio" => covered / uq.len() as f64,
            "stream_length" => self.doc.len() as f64,
            "bm25" => self.bm25(p),
            "cosine" => {
                let (q, d) = (self.weighted(&self.query), self.weighted(&self.doc));
                let dot: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
                let nq: f64 = q.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nd: f64 = d.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dot / (nq * nd)).min(1.0)
            }
            "euclidean" => {
                let (q, d) = (self.weighted(&self.query), self.weighted(&self.doc));
                q.iter().zip(&d).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            }
            "manhattan" => {
                let (q, d) = (self.weighted(&self.query), self.weighted(&self.doc));
                q.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum()
            }
            "kl" => kl(&self.smoothed(&self.query), &self.smoothed(&self.doc)),
            "js" => {
                let (p, q) = (self.smoothed(&self.query), self.smoothed(&self.doc));
                let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a + b) / 2.0).collect();
                0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)
            }
            _ => panic!("no oracle for {name}"),
        }
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

/// Checks `n` random instances against the oracle; returns the first
/// mismatch as a message.
pub fn run_suite(seed: u64, n: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Bm25Params::default();
    let mut checked = 0;
    for i in 0..n {
        let inst = Instance::random(&mut rng);
        for f in FeatureId::all() {
            let got = inst.compute(f, &params);
            let want = inst.oracle(&f.name(), &params);
            if !close(got, want) {
                return Err(format!("instance {i}, {f}: got {got}, oracle {want}\n{inst:?}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
