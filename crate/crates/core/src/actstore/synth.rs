// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{ActivationStore, Dtype};
use crate::error::{Error, Result};
use crate::rng;

/// A linear signal written into chosen neurons of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    pub layer: usize,
    pub neurons: Vec<usize>,
    pub weights: Vec<f64>,
    pub labels: Vec<f64>,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_layers: usize,
    pub n_neurons: usize,
    /// Row identifiers; their count is the sample count.
    pub pair_ids: Vec<String>,
    pub planted: Vec<PlantedSignal>,
    pub dtype: Dtype,
}

impl SynthSpec {
    /// Spec with generated ids `s0, s1, ...` and f32 storage.
    pub fn new(seed: u64, n_samples: usize, n_layers: usize, n_neurons: usize) -> Self {
        Self {
            seed,
            n_layers,
            n_neurons,
            pair_ids: (0..n_samples).map(|i| format!("s{i}")).collect(),
            planted: Vec::new(),
            dtype: Dtype::F32,
        }
    }

    pub fn plant(mut self, signal: PlantedSignal) -> Self {
        self.planted.push(signal);
        self
    }
}

/// Background activations are iid standard normal. For each planted signal
/// the designated neurons of every row are moved by the minimum-norm
/// correction that makes `weights . acts[neurons] = label + noise`.
pub fn synth_activations(spec: &SynthSpec) -> Result<ActivationStore> {
    let n = spec.pair_ids.len();
    let d = spec.n_neurons;
    for p in &spec.planted {
        if p.layer >= spec.n_layers {
            return Err(Error::Config(format!("planted layer {} >= n_layers {}", p.layer, spec.n_layers)));
        }
        if let Some(&index) = p.neurons.iter().find(|&&j| j >= d) {
            return Err(Error::IndexOutOfRange { index, len: d });
        }
        let mut uniq = p.neurons.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != p.neurons.len() || p.neurons.is_empty() {
            return Err(Error::Config("planted neuron set must be nonempty and distinct".into()));
        }
        if p.weights.len() != p.neurons.len() {
            return Err(Error::Shape(format!("{} weights for {} neurons", p.weights.len(), p.neurons.len())));
        }
        if p.weights.iter().map(|w| w * w).sum::<f64>() == 0.0 {
            return Err(Error::Config("planted weights are all zero".into()));
        }
        if p.labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} samples", p.labels.len())));
        }
        if p.labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("planted labels"));
        }
        if !(p.noise_sd >= 0.0 && p.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be >= 0, got {}", p.noise_sd)));
        }
    }

    let mut layers = Vec::with_capacity(spec.n_layers);
    for layer in 0..spec.n_layers {
        let mut r = rng::derived(spec.seed, &format!("layer{layer}"));
        let mut acts: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
        for (k, p) in spec.planted.iter().enumerate().filter(|(_, p)| p.layer == layer) {
            let mut nr = rng::derived(spec.seed, &format!("noise{k}"));
            let noise = Normal::new(0.0, p.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
            let w_sq: f64 = p.weights.iter().map(|w| w * w).sum();
            for i in 0..n {
                let eps = if p.noise_sd > 0.0 { noise.sample(&mut nr) } else { 0.0 };
                let row = &mut acts[i * d..(i + 1) * d];
                let current: f64 = p.neurons.iter().zip(&p.weights).map(|(&j, w)| w * row[j]).sum();
                let step = (p.labels[i] + eps - current) / w_sq;
                for (&j, w) in p.neurons.iter().zip(&p.weights) {
                    row[j] += w * step;
                }
            }
        }
        layers.push(acts);
    }
    ActivationStore::from_dense(spec.dtype, d, spec.pair_ids.clone(), &layers)
}

/// Uniform labels on `[lo, hi)` from a seed, for tests and demos.
pub fn uniform_labels(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}
