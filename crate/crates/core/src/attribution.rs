// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attribution of the ranking score to final-layer neurons.
//!
//! The score head is linear, so Integrated Gradients and Shapley values both
//! reduce to `weight_j * (act_j - baseline_j)` and are computed in closed form.
//! Probe-selected neuron groups are then ranked against random groups of the
//! same size by mean absolute contribution.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actstore::ActivationStore;
use crate::error::{Error, Result};
use crate::probekit::ProbeModel;
use crate::rng;

/// Number of random comparison groups per percentile.
pub const RANDOM_GROUPS: usize = 10_000;
/// Percentile a probe group must reach to count as a case.
pub const CASE_PERCENTILE: f64 = 95.0;

/// Final linear projection from the last-layer representation to a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ScoreHead {
    pub fn score(&self, acts: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(acts).map(|(w, a)| w * a).sum::<f64>()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let head: Self = serde_json::from_str(&text)?;
        if head.weights.iter().any(|w| !w.is_finite()) || !head.bias.is_finite() {
            return Err(Error::NonFinite("score head"));
        }
        Ok(head)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub contributions: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Head output at the activation.
    pub score: f64,
}

impl AttributionResult {
    /// `head(baseline) + sum(contributions) - head(activation)`; zero up to rounding.
    pub fn completeness_gap(&self, head: &ScoreHead) -> f64 {
        head.score(&self.baseline) + self.contributions.iter().sum::<f64>() - self.score
    }
}

pub fn neuron_contributions(final_acts: &[f64], head: &ScoreHead, baseline: &[f64]) -> Result<AttributionResult> {
    if final_acts.len() != head.weights.len() || baseline.len() != head.weights.len() {
        return Err(Error::Shape(format!(
            "activation {}, baseline {}, head {}",
            final_acts.len(),
            baseline.len(),
            head.weights.len()
        )));
    }
    let contributions =
        head.weights.iter().zip(final_acts.iter().zip(baseline)).map(|(w, (a, b))| w * (a - b)).collect();
    Ok(AttributionResult { contributions, baseline: baseline.to_vec(), score: head.score(final_acts) })
}

fn mean_abs(contributions: &[f64], group: &mut [usize]) -> f64 {
    // Fixed summation order, so identical sets give identical means.
    group.sort_unstable();
    group.iter().map(|&j| contributions[j].abs()).sum::<f64>() / group.len() as f64
}

/// Percentile of the group's mean |contribution| among [`RANDOM_GROUPS`]
/// random groups of the same size. Counts random groups `<=` the target, so
/// a group tied with every alternative scores 100.
pub fn group_percentile(contributions: &[f64], group: &[usize], seed: u64) -> Result<f64> {
    group_percentile_with(contributions, group, &mut rng::seeded(seed), RANDOM_GROUPS)
}

fn group_percentile_with(
    contributions: &[f64],
    group: &[usize],
    rng: &mut impl rand::Rng,
    n_random: usize,
) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::Empty("neuron group"));
    }
    let d = contributions.len();
    if let Some(&index) = group.iter().find(|&&j| j >= d) {
        return Err(Error::IndexOutOfRange { index, len: d });
    }
    let mut g = group.to_vec();
    g.sort_unstable();
    g.dedup();
    let target = mean_abs(contributions, &mut g);
    let k = g.len();
    let mut below = 0usize;
    let mut scratch = Vec::with_capacity(k);
    for _ in 0..n_random {
        scratch.clear();
        scratch.extend(index::sample(rng, d, k).iter());
        if mean_abs(contributions, &mut scratch) <= target {
            below += 1;
        }
    }
    Ok(100.0 * below as f64 / n_random as f64)
}

/// Reference point for attributions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    #[default]
    Zero,
    DatasetMean,
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Baseline::Zero),
            "dataset-mean" | "mean" => Ok(Baseline::DatasetMean),
            _ => Err(Error::Config(format!("unknown baseline `{s}` (zero|dataset-mean)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub feature: String,
    pub cases_at_95th: usize,
    pub n_pairs: usize,
    pub seed: u64,
}

/// Samples `n_pairs` store rows and counts how often the probe's nonzero
/// neurons reach the 95th percentile of contribution. Each pair draws its
/// random groups from a stream derived from `(seed, pair_id)`.
pub fn validate_probe_neurons(
    probe: &ProbeModel,
    store: &ActivationStore,
    head: &ScoreHead,
    n_pairs: usize,
    seed: u64,
    baseline: Baseline,
) -> Result<ValidationSummary> {
    if probe.layer != store.final_layer() {
        return Err(Error::NotFinalLayer { layer: probe.layer, final_layer: store.final_layer() });
    }
    if head.weights.len() != store.n_neurons() {
        return Err(Error::Shape(format!(
            "head has {} weights, store has {} neurons",
            head.weights.len(),
            store.n_neurons()
        )));
    }
    if probe.nonzero_idx.is_empty() {
        return Err(Error::Empty("probe neuron set (all coefficients are zero)"));
    }
    if n_pairs == 0 || n_pairs > store.n_samples() {
        return Err(Error::Config(format!("n_pairs must be in 1..={}, got {n_pairs}", store.n_samples())));
    }
    let layer = store.final_layer();
    let base = match baseline {
        Baseline::Zero => vec![0.0; store.n_neurons()],
        Baseline::DatasetMean => store.mean_row(layer),
    };
    let mut rows = index::sample(&mut rng::seeded(seed), store.n_samples(), n_pairs).into_vec();
    rows.sort_unstable();
    let hits = rows
        .par_iter()
        .map(|&row| {
            let attr = neuron_contributions(&store.row(layer, row), head, &base)?;
            let mut r = rng::derived(seed, &store.pair_ids()[row]);
            let pct = group_percentile_with(&attr.contributions, &probe.nonzero_idx, &mut r, RANDOM_GROUPS)?;
            Ok(pct >= CASE_PERCENTILE)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(ValidationSummary {
        feature: probe.feature_name.clone(),
        cases_at_95th: hits.into_iter().filter(|h| *h).count(),
        n_pairs,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn head(w: &[f64], b: f64) -> ScoreHead {
        ScoreHead { weights: w.to_vec(), bias: b }
    }

    #[test]
    fn hand_example() {
        let r = neuron_contributions(&[3.0, 1.0], &head(&[1.0, -2.0], 0.0), &[0.0, 0.0]).unwrap();
        assert_eq!(r.contributions, [3.0, -2.0]);
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn baseline_equal_to_activation() {
        let a = [0.3, -1.2, 4.0];
        let r = neuron_contributions(&a, &head(&[1.0, 2.0, 3.0], 0.5), &a).unwrap();
        assert!(r.contributions.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn zero_weights() {
        let r = neuron_contributions(&[5.0, -7.0], &head(&[0.0, 0.0], 1.0), &[0.0, 0.0]).unwrap();
        assert!(r.contributions.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(neuron_contributions(&[1.0], &head(&[1.0, 2.0], 0.0), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn argmax_singleton_and_ties() {
        let c = [0.1, -5.0, 0.3, 0.2];
        assert_eq!(group_percentile(&c, &[1], 3).unwrap(), 100.0);
        assert_eq!(group_percentile(&[2.0; 6], &[0, 4], 3).unwrap(), 100.0);
        assert!(group_percentile(&c, &[], 3).is_err());
        assert!(group_percentile(&c, &[4], 3).is_err());
    }

    #[test]
    fn smallest_singleton_is_low() {
        let c: Vec<f64> = (0..100).map(f64::from).collect();
        let p = group_percentile(&c, &[0], 11).unwrap();
        assert!(p < 3.0, "{p}");
    }

    #[test]
    fn baseline_parse() {
        assert_eq!("zero".parse::<Baseline>().unwrap(), Baseline::Zero);
        assert_eq!("dataset-mean".parse::<Baseline>().unwrap(), Baseline::DatasetMean);
        assert!("median".parse::<Baseline>().is_err());
    }

    proptest! {
        #[test]
        fn completeness(acts in prop::collection::vec(-10.0f64..10.0, 1..40), seed in any::<u64>()) {
            use rand::Rng;
            let mut r = rng::seeded(seed);
            let d = acts.len();
            let h = head(&(0..d).map(|_| r.random_range(-3.0..3.0)).collect::<Vec<_>>(), r.random_range(-1.0..1.0));
            let base: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let res = neuron_contributions(&acts, &h, &base).unwrap();
            let scale = res.score.abs().max(1.0);
            prop_assert!(res.completeness_gap(&h).abs() <= 1e-6 * scale);
        }

        #[test]
        fn vanishes_only_at_baseline(acts in prop::collection::vec(-10.0f64..10.0, 1..20), bump in 0usize..20) {
            let d = acts.len();
            let h = head(&vec![1.5; d], 0.0);
            let mut base = acts.clone();
            prop_assert!(neuron_contributions(&acts, &h, &base).unwrap().contributions.iter().all(|c| *c == 0.0));
            base[bump % d] += 1.0;
            prop_assert!(neuron_contributions(&acts, &h, &base).unwrap().contributions.iter().any(|c| *c != 0.0));
        }

        #[test]
        fn percentile_scale_invariant(c in prop::collection::vec(-5.0f64..5.0, 8..40),
                                      k in 1usize..4, scale_exp in -8i32..8, seed in any::<u64>()) {
            let group: Vec<usize> = (0..k).collect();
            let scale = 2f64.powi(scale_exp);
            let scaled: Vec<f64> = c.iter().map(|v| v * scale).collect();
            let mut r1 = rng::seeded(seed);
            let mut r2 = rng::seeded(seed);
            let a = group_percentile_with(&c, &group, &mut r1, 500).unwrap();
            let b = group_percentile_with(&scaled, &group, &mut r2, 500).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn percentile_scale_invariant_general(c in prop::collection::vec(0.1f64..5.0, 8..40),
                                              scale in 0.01f64..100.0, seed in any::<u64>()) {
            // Distinct magnitudes make near-ties vanishingly unlikely.
            let group = [0usize, 2];
            let scaled: Vec<f64> = c.iter().map(|v| v * scale).collect();
            let a = group_percentile_with(&c, &group, &mut rng::seeded(seed), 300).unwrap();
            let b = group_percentile_with(&scaled, &group, &mut rng::seeded(seed), 300).unwrap();
            prop_assert!((a - b).abs() <= 100.0 / 300.0 + 1e-12);
        }
    }
}
