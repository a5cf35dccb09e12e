// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer aggregated activation matrices.
//!
//! One row per query-document pair, one column per neuron, one matrix per
//! layer (layer 0 is the first block's output). Payloads are kept in their
//! stored form (f32 values or i8 codes plus a per-layer scale) so a store
//! survives a write/read cycle bit for bit.

mod aggregate;
mod format;
mod quant;
mod synth;

use std::collections::{HashMap, HashSet};

use ndarray::Array2;

pub use aggregate::{aggregate_tokens, AggregationMode};
pub use format::{decode_store, encode_store, read_store, write_store, FORMAT_VERSION, MAGIC};
pub use quant::{dequantize, i8_scale, quantize, Dtype};
pub use synth::{synth_activations, uniform_labels, PlantedSignal, SynthSpec};

use crate::error::{Error, Result};

/// Stored payload of one layer, row-major (sample-major).
#[derive(Debug, Clone, PartialEq)]
pub enum LayerData {
    F32(Vec<f32>),
    I8 { codes: Vec<i8>, scale: f64 },
}

impl LayerData {
    fn len(&self) -> usize {
        match self {
            LayerData::F32(v) => v.len(),
            LayerData::I8 { codes, .. } => codes.len(),
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            LayerData::F32(_) => 1.0,
            LayerData::I8 { scale, .. } => *scale,
        }
    }

    fn get(&self, idx: usize) -> f64 {
        match self {
            LayerData::F32(v) => f64::from(v[idx]),
            LayerData::I8 { codes, scale } => f64::from(codes[idx]) * scale,
        }
    }

    /// Quantizes a row-major layer with one scale for the whole layer.
    pub fn encode(values: &[f64], dtype: Dtype) -> Result<Self> {
        let (bytes, scale) = quantize(values, dtype)?;
        Ok(match dtype {
            Dtype::F32 => {
                LayerData::F32(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
            }
            Dtype::I8 => LayerData::I8 { codes: bytes.into_iter().map(|b| b as i8).collect(), scale },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStore {
    dtype: Dtype,
    n_neurons: usize,
    pair_ids: Vec<String>,
    layers: Vec<LayerData>,
    index: HashMap<String, usize>,
}

impl ActivationStore {
    /// Validates shapes, id uniqueness, and finiteness.
    pub fn from_layers(dtype: Dtype, n_neurons: usize, pair_ids: Vec<String>, layers: Vec<LayerData>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layers"));
        }
        if n_neurons == 0 {
            return Err(Error::Empty("neurons"));
        }
        let cells = pair_ids.len() * n_neurons;
        for (l, layer) in layers.iter().enumerate() {
            let matches_dtype =
                matches!((layer, dtype), (LayerData::F32(_), Dtype::F32) | (LayerData::I8 { .. }, Dtype::I8));
            if !matches_dtype {
                return Err(Error::Shape(format!("layer {l} payload does not match dtype {dtype}")));
            }
            if layer.len() != cells {
                return Err(Error::Shape(format!(
                    "layer {l} holds {} values, expected {} x {n_neurons}",
                    layer.len(),
                    pair_ids.len()
                )));
            }
            match layer {
                LayerData::F32(v) if v.iter().any(|x| !x.is_finite()) => {
                    return Err(Error::NonFinite("activations"));
                }
                LayerData::I8 { scale, .. } if !(scale.is_finite() && *scale > 0.0) => {
                    return Err(Error::NonFinite("layer scale"));
                }
                _ => {}
            }
        }
        let mut seen = HashSet::with_capacity(pair_ids.len());
        for id in &pair_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Duplicate(id.clone()));
            }
        }
        let index = pair_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self { dtype, n_neurons, pair_ids, layers, index })
    }

    /// Quantizes dense row-major layers (each `n_samples * n_neurons`).
    pub fn from_dense(dtype: Dtype, n_neurons: usize, pair_ids: Vec<String>, layers: &[Vec<f64>]) -> Result<Self> {
        let encoded = layers.iter().map(|l| LayerData::encode(l, dtype)).collect::<Result<Vec<_>>>()?;
        Self::from_layers(dtype, n_neurons, pair_ids, encoded)
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_samples(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn final_layer(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn pair_ids(&self) -> &[String] {
        &self.pair_ids
    }

    pub fn row_of(&self, pair_id: &str) -> Option<usize> {
        self.index.get(pair_id).copied()
    }

    pub fn layer_data(&self, layer: usize) -> &LayerData {
        &self.layers[layer]
    }

    pub fn value(&self, layer: usize, row: usize, neuron: usize) -> f64 {
        self.layers[layer].get(row * self.n_neurons + neuron)
    }

    /// Dequantized activations of one pair at one layer.
    pub fn row(&self, layer: usize, row: usize) -> Vec<f64> {
        (0..self.n_neurons).map(|j| self.value(layer, row, j)).collect()
    }

    /// Dequantized `n_samples x n_neurons` view of a layer.
    pub fn layer(&self, layer: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.n_samples(), self.n_neurons), |(i, j)| self.value(layer, i, j))
    }

    /// Dequantized rows for the given pair ids, in that order.
    pub fn gather(&self, layer: usize, pair_ids: &[String]) -> Result<Array2<f64>> {
        let rows = self.rows_for(pair_ids)?;
        Ok(Array2::from_shape_fn((rows.len(), self.n_neurons), |(i, j)| self.value(layer, rows[i], j)))
    }

    /// Store rows of `pair_ids`; errors on the first id the store lacks.
    pub fn rows_for(&self, pair_ids: &[String]) -> Result<Vec<usize>> {
        pair_ids.iter().map(|id| self.row_of(id).ok_or_else(|| Error::MissingPair(id.clone()))).collect()
    }

    /// Column-wise mean of a layer over all samples.
    pub fn mean_row(&self, layer: usize) -> Vec<f64> {
        let n = self.n_samples() as f64;
        let mut acc = vec![0.0; self.n_neurons];
        for i in 0..self.n_samples() {
            for (j, a) in acc.iter_mut().enumerate() {
                *a += self.value(layer, i, j);
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn dense_round_trip_and_lookup() {
        let l0: Vec<f64> = (0..6).map(f64::from).collect();
        let l1: Vec<f64> = (0..6).map(|i| -f64::from(i)).collect();
        let s = ActivationStore::from_dense(Dtype::F32, 2, ids(3), &[l0, l1]).unwrap();
        assert_eq!((s.n_layers(), s.n_samples(), s.n_neurons()), (2, 3, 2));
        assert_eq!(s.row(1, 2), [-4.0, -5.0]);
        assert_eq!(s.row_of("p1"), Some(1));
        let g = s.gather(0, &["p2".into(), "p0".into()]).unwrap();
        assert_eq!(g.row(0).to_vec(), [4.0, 5.0]);
        assert_eq!(s.mean_row(0), [2.0, 3.0]);
        assert!(matches!(s.gather(0, &["zz".into()]), Err(Error::MissingPair(id)) if id == "zz"));
    }

    #[test]
    fn shape_and_id_checks() {
        assert!(ActivationStore::from_dense(Dtype::F32, 2, ids(3), &[vec![0.0; 5]]).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(ActivationStore::from_dense(Dtype::F32, 1, dup, &[vec![0.0; 2]]).is_err());
        assert!(ActivationStore::from_dense(Dtype::I8, 1, ids(1), &[]).is_err());
    }
}
