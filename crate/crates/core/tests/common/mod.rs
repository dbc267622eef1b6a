#![allow(dead_code)]

use std::collections::HashMap;

use grace_core::nn::NeuralNet;
use grace_core::{DifferentiableModel, Result};
use rand::Rng;

/// A network with the given layer sizes and weights drawn from `[-1, 1]`.
pub fn random_net<R: Rng>(dims: &[usize], rng: &mut R) -> NeuralNet {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        weights.push(
            (0..w[0] * w[1])
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );
        biases.push((0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect());
    }
    NeuralNet::from_parts(dims.to_vec(), weights, biases).unwrap()
}

/// A softmax-over-linear net: `logits = W x + b`, `W` given row per class.
pub fn linear_net(rows: &[Vec<f64>], bias: &[f64]) -> NeuralNet {
    let m = rows[0].len();
    let w: Vec<f64> = rows.iter().flatten().copied().collect();
    NeuralNet::from_parts(vec![m, rows.len()], vec![w], vec![bias.to_vec()]).unwrap()
}

/// Binary model scoring directly in logit space: `scores = [0, w.x + b]`.
/// Its score gap is affine in `x`, so one projection lands on the hyperplane.
pub struct LogitLine {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LogitLine {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }
}

impl DifferentiableModel for LogitLine {
    fn num_features(&self) -> usize {
        self.w.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0, self.logit(x)])
    }

    fn jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        Ok((
            self.predict(x)?,
            vec![vec![0.0; self.w.len()], self.w.clone()],
        ))
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[j] += h;
            lo[j] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// `max_j |a_j - b_j| / max(max|a|, max|b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = a.iter().chain(b).fold(floor, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Entropy in bits straight from value frequencies.
pub fn brute_entropy(a: &[u32]) -> f64 {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &v in a {
        *counts.entry(v).or_default() += 1;
    }
    let n = a.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Mutual information from the joint contingency table.
pub fn brute_mutual_information(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len() as f64;
    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    let mut ca: HashMap<u32, usize> = HashMap::new();
    let mut cb: HashMap<u32, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = ca[&x] as f64 / n;
            let py = cb[&y] as f64 / n;
            pxy * (pxy / (px * py)).log2()
        })
        .sum::<f64>()
        .max(0.0)
}

pub fn brute_su(a: &[u32], b: &[u32]) -> f64 {
    let (ha, hb) = (brute_entropy(a), brute_entropy(b));
    if ha + hb == 0.0 {
        return 0.0;
    }
    (2.0 * brute_mutual_information(a, b) / (ha + hb)).clamp(0.0, 1.0)
}
