//! The model interface consumed by ranking and generation, and the persisted
//! classifier (network plus the scaling of its inputs).

use std::borrow::Cow;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::nn::{NeuralNet, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

/// A classifier with class scores and their input gradients.
pub trait DifferentiableModel: Sync {
    fn num_features(&self) -> usize;
    fn num_classes(&self) -> usize;

    /// Class scores (probabilities for softmax models).
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Scores together with the input gradient of every class score.
    fn jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;

    fn class_gradient(&self, x: &[f64], c: usize) -> Result<Vec<f64>> {
        if c >= self.num_classes() {
            return Err(Error::InvalidClass {
                index: c,
                classes: self.num_classes(),
            });
        }
        let (_, mut grads) = self.jacobian(x)?;
        Ok(grads.swap_remove(c))
    }

    /// Length of one unit of the projection metric along each input axis.
    /// Gradients are multiplied by it before projecting and steps are multiplied
    /// by it before being applied, so projection happens in the scaled space.
    fn input_scale(&self) -> Cow<'_, [f64]> {
        Cow::Owned(vec![1.0; self.num_features()])
    }

    /// Coordinates in which neighbor distances are measured: each feature divided
    /// by its scale, constant features mapped to 0.
    fn to_metric(&self, x: &[f64]) -> Vec<f64> {
        let scale = self.input_scale();
        x.iter()
            .zip(scale.iter())
            .map(|(&v, &s)| if s > 0.0 { v / s } else { 0.0 })
            .collect()
    }

    fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict(x)?))
    }
}

/// Index of the largest value; ties resolve to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl DifferentiableModel for NeuralNet {
    fn num_features(&self) -> usize {
        NeuralNet::num_features(self)
    }

    fn num_classes(&self) -> usize {
        NeuralNet::num_classes(self)
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        NeuralNet::jacobian(self, x)
    }

    fn class_gradient(&self, x: &[f64], c: usize) -> Result<Vec<f64>> {
        NeuralNet::class_gradient(self, x, c)
    }
}

/// How the training split was drawn, so a model can be paired with its data again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub split_seed: u64,
    pub split_ratios: [f64; 3],
    pub train_config: TrainConfig,
}

/// A trained network that accepts raw feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub net: NeuralNet,
    pub normalizer: Normalizer,
    pub class_labels: Vec<String>,
    pub feature_names: Vec<String>,
    pub provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    class_labels: Vec<String>,
    feature_names: Vec<String>,
    normalization: Normalizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl Classifier {
    pub fn new(
        net: NeuralNet,
        normalizer: Normalizer,
        class_labels: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let m = net.num_features();
        for len in [normalizer.num_features(), feature_names.len()] {
            if len != m {
                return Err(Error::Shape {
                    expected: m,
                    actual: len,
                });
            }
        }
        if class_labels.len() != net.num_classes() {
            return Err(Error::Shape {
                expected: net.num_classes(),
                actual: class_labels.len(),
            });
        }
        Ok(Self {
            net,
            normalizer,
            class_labels,
            feature_names,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        self.normalizer.transform(x)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            layer_dims: self.net.layer_dims().to_vec(),
            weights: self.net.weights().to_vec(),
            biases: self.net.biases().to_vec(),
            class_labels: self.class_labels.clone(),
            feature_names: self.feature_names.clone(),
            normalization: self.normalizer.clone(),
            provenance: self.provenance.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        let net = NeuralNet::from_parts(file.layer_dims, file.weights, file.biases)?;
        let mut model = Self::new(
            net,
            file.normalization,
            file.class_labels,
            file.feature_names,
        )?;
        model.provenance = file.provenance;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl DifferentiableModel for Classifier {
    fn num_features(&self) -> usize {
        self.net.num_features()
    }

    fn num_classes(&self) -> usize {
        self.net.num_classes()
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features() {
            return Err(Error::Shape {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        self.net.forward(&self.normalize(x))
    }

    fn jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if x.len() != self.num_features() {
            return Err(Error::Shape {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        let (probs, mut grads) = self.net.jacobian(&self.normalize(x))?;
        let ranges = self.normalizer.ranges();
        for g in grads.iter_mut() {
            for (v, &r) in g.iter_mut().zip(&ranges) {
                *v = if r > 0.0 { *v / r } else { 0.0 };
            }
        }
        Ok((probs, grads))
    }

    /// Feature ranges, so projections are measured in normalized units.
    fn input_scale(&self) -> Cow<'_, [f64]> {
        Cow::Owned(self.normalizer.ranges())
    }

    fn to_metric(&self, x: &[f64]) -> Vec<f64> {
        self.normalize(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_classifier() -> Classifier {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = NeuralNet::glorot(vec![3, 4, 3, 2], &mut rng).unwrap();
        let norm = Normalizer {
            min: vec![0.0, 10.0, 1.0],
            max: vec![1.0, 30.0, 1.0],
        };
        Classifier::new(
            net,
            norm,
            vec!["no".into(), "yes".into()],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    #[test]
    fn argmax_ties_pick_first() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = sample_classifier().with_provenance(Provenance {
            split_seed: 9,
            split_ratios: [0.8, 0.1, 0.1],
            train_config: TrainConfig::default(),
        });
        let back = Classifier::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), m.to_json().unwrap());
    }

    #[test]
    fn raw_gradient_matches_finite_difference() {
        let m = sample_classifier();
        let x = [0.3, 17.0, 1.0];
        let g = m.class_gradient(&x, 1).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut hi = x;
            let mut lo = x;
            hi[j] += h;
            lo[j] -= h;
            let fd = (m.predict(&hi).unwrap()[1] - m.predict(&lo).unwrap()[1]) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "{j}: {fd} vs {}", g[j]);
        }
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn rejects_wrong_version() {
        let text = sample_classifier()
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(Classifier::from_json(&text).is_err());
    }
}
