//! Dense feed-forward classifier with ReLU hidden layers and a softmax head.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`, one matrix per
//! layer. All arithmetic is `f64`. Besides inference the network exposes the
//! input gradient of every class probability, which is what the contrastive
//! generator and the gradient ranking consume.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const BIAS_INIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace {
    /// Layer inputs: `inputs[0]` is `x`, `inputs[l]` is the activation feeding layer `l`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every hidden layer.
    hidden_pre: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl NeuralNet {
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Config(
                "a network needs at least an input and an output layer".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Shape {
                expected: layers,
                actual: weights.len().min(biases.len()),
            });
        }
        for l in 0..layers {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            if weights[l].len() != fan_in * fan_out {
                return Err(Error::Shape {
                    expected: fan_in * fan_out,
                    actual: weights[l].len(),
                });
            }
            if biases[l].len() != fan_out {
                return Err(Error::Shape {
                    expected: fan_out,
                    actual: biases[l].len(),
                });
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
        })
    }

    /// A network with every weight and bias set to zero; its output is uniform.
    pub fn zeros(layer_dims: Vec<usize>) -> Result<Self> {
        let weights = layer_dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_dims.windows(2).map(|w| vec![0.0; w[1]]).collect();
        Self::from_parts(layer_dims, weights, biases)
    }

    /// Glorot-uniform weights, biases set to [`BIAS_INIT`].
    pub fn glorot<R: Rng + ?Sized>(layer_dims: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_dims)?;
        for l in 0..net.weights.len() {
            let (fan_in, fan_out) = (net.layer_dims[l], net.layer_dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in net.weights[l].iter_mut() {
                *w = rng.random_range(-limit..limit);
            }
            net.biases[l].fill(BIAS_INIT);
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn num_features(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().expect("validated at construction")
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features() {
            return Err(Error::Shape {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c >= self.num_classes() {
            return Err(Error::InvalidClass {
                index: c,
                classes: self.num_classes(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let layers = self.weights.len();
        let mut inputs = Vec::with_capacity(layers);
        let mut hidden_pre = Vec::with_capacity(layers - 1);
        let mut a = x.to_vec();
        for l in 0..layers {
            let z = affine(&self.weights[l], &self.biases[l], &a);
            inputs.push(a);
            if l + 1 < layers {
                a = z.iter().map(|&v| v.max(0.0)).collect();
                hidden_pre.push(z);
            } else {
                a = softmax(&z);
            }
        }
        Trace {
            inputs,
            hidden_pre,
            probs: a,
        }
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).probs)
    }

    /// Pushes an output-logit gradient back to the input.
    fn backprop_to_input(&self, trace: &Trace, mut delta: Vec<f64>) -> Vec<f64> {
        for l in (0..self.weights.len()).rev() {
            let fan_in = self.layer_dims[l];
            let mut upstream = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                for (u, &w) in upstream.iter_mut().zip(row) {
                    *u += w * d;
                }
            }
            if l > 0 {
                for (u, &z) in upstream.iter_mut().zip(&trace.hidden_pre[l - 1]) {
                    if z <= 0.0 {
                        *u = 0.0;
                    }
                }
            }
            delta = upstream;
        }
        delta
    }

    /// Gradient of the class-`c` softmax output with respect to the input.
    pub fn class_gradient(&self, x: &[f64], c: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_class(c)?;
        let trace = self.trace(x);
        let delta = softmax_row_jacobian(&trace.probs, c);
        Ok(self.backprop_to_input(&trace, delta))
    }

    /// Probabilities together with the input gradient of every class.
    pub fn jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_input(x)?;
        let trace = self.trace(x);
        let grads = (0..self.num_classes())
            .map(|c| self.backprop_to_input(&trace, softmax_row_jacobian(&trace.probs, c)))
            .collect();
        Ok((trace.probs, grads))
    }

    /// Mean cross-entropy of `rows` against `labels`.
    pub fn mean_loss(&self, rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in rows.iter().zip(labels) {
            self.check_input(x)?;
            self.check_class(y)?;
            total += cross_entropy(&self.trace(x).probs, y);
        }
        Ok(total / rows.len().max(1) as f64)
    }

    /// Mean cross-entropy and its parameter gradients over a batch of row indices.
    pub fn loss_and_gradients(
        &self,
        rows: &[Vec<f64>],
        labels: &[usize],
        batch: &[usize],
    ) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let layers = self.weights.len();
        for &i in batch {
            let (x, y) = (&rows[i], labels[i]);
            self.check_input(x)?;
            self.check_class(y)?;
            let trace = self.trace(x);
            loss += cross_entropy(&trace.probs, y);
            let mut delta = trace.probs.clone();
            delta[y] -= 1.0;
            for l in (0..layers).rev() {
                let fan_in = self.layer_dims[l];
                let input = &trace.inputs[l];
                let gw = &mut grads.weights[l];
                for (o, &d) in delta.iter().enumerate() {
                    grads.biases[l][o] += d;
                    if d == 0.0 {
                        continue;
                    }
                    for (g, &a) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let mut upstream = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                    for (u, &w) in upstream.iter_mut().zip(row) {
                        *u += w * d;
                    }
                }
                for (u, &z) in upstream.iter_mut().zip(&trace.hidden_pre[l - 1]) {
                    if z <= 0.0 {
                        *u = 0.0;
                    }
                }
                delta = upstream;
            }
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        grads.scale(scale);
        Ok((loss * scale, grads))
    }
}

fn affine(weights: &[f64], biases: &[f64], input: &[f64]) -> Vec<f64> {
    let fan_in = input.len();
    biases
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            weights[o * fan_in..(o + 1) * fan_in]
                .iter()
                .zip(input)
                .fold(b, |acc, (&w, &a)| acc + w * a)
        })
        .collect()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row `c` of the softmax Jacobian: `d p_c / d z_k = p_c (1[c = k] - p_k)`.
fn softmax_row_jacobian(probs: &[f64], c: usize) -> Vec<f64> {
    let pc = probs[c];
    probs
        .iter()
        .enumerate()
        .map(|(k, &pk)| if k == c { pc * (1.0 - pk) } else { -pc * pk })
        .collect()
}

fn cross_entropy(probs: &[f64], y: usize) -> f64 {
    -probs[y].max(f64::MIN_POSITIVE).ln()
}

/// Parameter gradients with the same layout as a [`NeuralNet`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &NeuralNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &NeuralNet, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn update(&mut self, net: &mut NeuralNet, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
        let lr = self.learning_rate;
        let params = net.weights.iter_mut().chain(net.biases.iter_mut());
        let firsts = self.m.weights.iter_mut().chain(self.m.biases.iter_mut());
        let seconds = self.v.weights.iter_mut().chain(self.v.biases.iter_mut());
        let gs = grads.weights.iter().chain(grads.biases.iter());
        for (((p, m), v), g) in params.zip(firsts).zip(seconds).zip(gs) {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_sizes: [usize; 2],
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stopping_patience: usize,
    pub max_epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: [15, 15],
            batch_size: 512,
            learning_rate: 0.01,
            early_stopping_patience: 3,
            max_epochs: 500,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.early_stopping_patience == 0 {
            return Err(Error::Config(
                "early_stopping_patience must be at least 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub net: NeuralNet,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
}

/// Labeled rows for one split.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> Samples<'a> {
    pub fn new(rows: &'a [Vec<f64>], labels: &'a [usize]) -> Self {
        Self { rows, labels }
    }
}

/// Trains a two-hidden-layer network with Adam on cross-entropy, stopping early
/// on validation loss and restoring the best snapshot.
pub fn train(
    train: Samples<'_>,
    val: Samples<'_>,
    num_classes: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.rows.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    if val.rows.is_empty() {
        return Err(Error::Empty("validation split".into()));
    }
    if train.rows.len() != train.labels.len() || val.rows.len() != val.labels.len() {
        return Err(Error::Shape {
            expected: train.rows.len(),
            actual: train.labels.len(),
        });
    }
    if num_classes < 2 {
        return Err(Error::Config("at least two classes are required".into()));
    }
    if let Some(&bad) = train
        .labels
        .iter()
        .chain(val.labels)
        .find(|&&y| y >= num_classes)
    {
        return Err(Error::InvalidClass {
            index: bad,
            classes: num_classes,
        });
    }

    let m = train.rows[0].len();
    let dims = vec![
        m,
        config.hidden_sizes[0],
        config.hidden_sizes[1],
        num_classes,
    ];
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut net = NeuralNet::glorot(dims, &mut init_rng)?;
    let mut adam = Adam::new(&net, config.learning_rate);

    let mut best = net.clone();
    let mut best_loss = net.mean_loss(val.rows, val.labels)?;
    if !best_loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..train.rows.len()).collect();

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        shuffle_rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);

        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = net.loss_and_gradients(train.rows, train.labels, batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.update(&mut net, &grads);
        }

        let val_loss = net.mean_loss(val.rows, val.labels)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best = net.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stopping_patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        net: best,
        best_epoch,
        epochs_run,
        best_val_loss: best_loss,
    })
}
