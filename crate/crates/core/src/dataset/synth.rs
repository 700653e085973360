//! Class-conditional Gaussian stand-in for recorded physiological data.
//!
//! Class means move monotonically with the position code: EGG rises, SpO2 and
//! respiration rate fall, heart rate stays flat. That gives the same signs of
//! feature/position correlation as the recorded data this replaces.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureSchema, Matrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// `class_means[class][feature]`
    pub class_means: Vec<Vec<f64>>,
    /// `class_stds[class][feature]`
    pub class_stds: Vec<Vec<f64>>,
    /// Inclusive `(lower, upper)` per feature.
    pub clamp: Vec<(f64, f64)>,
    /// Decimal places kept per feature, mimicking instrument resolution.
    pub decimals: Vec<u32>,
    pub seed: u64,
}

impl SynthParams {
    /// Well-separated classes: EGG alone separates them by more than eight
    /// standard deviations between neighbouring class means.
    pub fn separated(seed: u64) -> Self {
        SynthParams {
            class_means: vec![
                vec![2.0, 72.0, 16.8, 98.0],
                vec![3.0, 72.0, 16.2, 96.8],
                vec![4.0, 72.0, 15.6, 95.6],
            ],
            class_stds: vec![vec![0.12, 5.0, 1.2, 0.9]; 3],
            clamp: Self::physiological_ranges(),
            decimals: vec![4, 0, 1, 1],
            seed,
        }
    }

    /// Overlapping classes; no single feature separates them.
    pub fn noisy(seed: u64) -> Self {
        SynthParams {
            class_means: vec![
                vec![2.6, 72.0, 16.6, 97.4],
                vec![3.0, 72.0, 16.2, 96.8],
                vec![3.4, 72.0, 15.8, 96.2],
            ],
            class_stds: vec![vec![0.55, 6.0, 1.8, 1.4]; 3],
            clamp: Self::physiological_ranges(),
            decimals: vec![4, 0, 1, 1],
            seed,
        }
    }

    fn physiological_ranges() -> Vec<(f64, f64)> {
        vec![(0.0, 10.0), (40.0, 160.0), (6.0, 40.0), (85.0, 100.0)]
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let k = schema.n_classes();
        let p = schema.n_features();
        let bad = |m: String| Err(Error::Config(m));
        if self.class_means.len() != k || self.class_stds.len() != k {
            return bad(format!("need means and stds for {k} classes"));
        }
        if self
            .class_means
            .iter()
            .chain(&self.class_stds)
            .any(|v| v.len() != p)
        {
            return bad(format!("every class needs {p} means and {p} stds"));
        }
        if self.class_means.iter().flatten().any(|m| !m.is_finite()) {
            return bad("class means must be finite".into());
        }
        if self
            .class_stds
            .iter()
            .flatten()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return bad("class stds must be finite and > 0".into());
        }
        if self.clamp.len() != p
            || self
                .clamp
                .iter()
                .any(|(lo, hi)| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less))
        {
            return bad(format!("need {p} clamp ranges with lower < upper"));
        }
        if self.decimals.len() != p || self.decimals.iter().any(|&d| d > 12) {
            return bad(format!("need {p} decimal counts, each ≤ 12"));
        }
        Ok(())
    }
}

impl Default for SynthParams {
    fn default() -> Self {
        Self::separated(42)
    }
}

/// Draws `n / K` rows per class, interleaved by class, using the posture
/// schema. Pure function of `(params, n)`.
pub fn generate(params: &SynthParams, n: usize) -> Result<Dataset> {
    let schema = FeatureSchema::posture();
    params.validate(&schema)?;
    let k = schema.n_classes();
    if !n.is_multiple_of(k) {
        return Err(Error::Config(format!(
            "row count {n} is not divisible by the {k} classes"
        )));
    }

    let p = schema.n_features();
    let dists: Vec<Vec<Normal<f64>>> = params
        .class_means
        .iter()
        .zip(&params.class_stds)
        .map(|(means, stds)| {
            means
                .iter()
                .zip(stds)
                .map(|(&m, &s)| Normal::new(m, s).expect("validated std"))
                .collect()
        })
        .collect();

    let mut rng = rng::seeded(params.seed);
    let mut features = Matrix::new(p);
    let mut labels = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for i in 0..n {
        let class = i % k;
        for (j, slot) in row.iter_mut().enumerate() {
            let (lo, hi) = params.clamp[j];
            let v = dists[class][j].sample(&mut rng).clamp(lo, hi);
            let scale = 10f64.powi(params.decimals[j] as i32);
            *slot = ((v * scale).round() / scale).clamp(lo, hi);
        }
        features.push_row(&row)?;
        labels.push(class);
    }
    Dataset::new(schema, features, labels)
}
