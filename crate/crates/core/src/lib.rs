// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mechanistic probing toolkit for neural ranking models.
//!
//! The pipeline: compute IR feature labels for query-document pairs
//! ([`irfeatures`]), balance and split probing datasets ([`corpus`]), read
//! per-layer aggregated activations ([`actstore`]), fit sparse Lasso probes
//! layer by layer ([`probekit`]), and check that probe-selected neurons
//! drive the ranking score ([`attribution`]). [`report`] orchestrates the
//! whole thing and writes diffable result directories.

// `!(a > b)` comparisons deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actstore;
pub mod attribution;
pub mod corpus;
pub mod error;
pub mod irfeatures;
pub mod probekit;
pub mod report;
pub(crate) mod rng;

pub use actstore::{ActivationStore, AggregationMode, Dtype};
pub use attribution::{AttributionResult, ScoreHead, ValidationSummary};
pub use corpus::{PairSet, ProbeDataset, QueryDocPair, SplitSpec};
pub use error::{Error, Result};
pub use irfeatures::{Bm25Params, CorpusStats, FeatureGroupExpr, FeatureId, MslrFeature, TokenStream};
pub use probekit::{LayerCurve, ProbeConfig, ProbeModel, Verdict};
