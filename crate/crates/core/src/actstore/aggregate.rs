// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-token activations collapse into one vector per input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    #[default]
    Mean,
    Max,
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::Mean => "mean",
            AggregationMode::Max => "max",
        })
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(AggregationMode::Mean),
            "max" => Ok(AggregationMode::Max),
            _ => Err(Error::Config(format!("unknown aggregation `{s}` (mean|max)"))),
        }
    }
}

/// Column-wise mean or max over an `n_tokens x n_neurons` matrix.
pub fn aggregate_tokens(token_acts: ArrayView2<'_, f64>, mode: AggregationMode) -> Result<Vec<f64>> {
    let n_tokens = token_acts.nrows();
    if n_tokens == 0 {
        return Err(Error::Empty("token activations"));
    }
    let out = token_acts
        .columns()
        .into_iter()
        .map(|col| match mode {
            AggregationMode::Mean => col.sum() / n_tokens as f64,
            AggregationMode::Max => col.fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
        })
        .collect();
    Ok(out)
}
