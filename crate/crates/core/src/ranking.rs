//! Instance-dependent feature rankings: input gradients toward the contrastive
//! class, or the weight contrast of a logistic surrogate fit on nearby points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::contrastive_class;
use crate::model::{argmax, DifferentiableModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    Gradient,
    Local,
}

impl std::str::FromStr for RankingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Self::Gradient),
            "local" => Ok(Self::Local),
            other => Err(Error::Config(format!("unknown ranking mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFeatures {
    /// Feature indices, most important first.
    pub order: Vec<usize>,
    /// Score of each entry of `order`; non-increasing.
    pub scores: Vec<f64>,
    pub mode: RankingMode,
    /// Set when every score was zero and index order was used instead.
    pub fallback: bool,
}

impl RankedFeatures {
    /// Orders features by descending score, ties by ascending index.
    pub fn from_scores(scores: &[f64], mode: RankingMode) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        let fallback = scores.iter().all(|&s| s == 0.0);
        if !fallback {
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        }
        Self {
            scores: order.iter().map(|&j| scores[j]).collect(),
            order,
            mode,
            fallback,
        }
    }

    fn index_order(m: usize, mode: RankingMode) -> Self {
        Self {
            order: (0..m).collect(),
            scores: vec![0.0; m],
            mode,
            fallback: true,
        }
    }
}

/// Ranks by `|d f_v / d x_j|` (in the model's projection metric) for the
/// contrastive class `v`.
pub fn rank_gradient_toward(
    model: &impl DifferentiableModel,
    x: &[f64],
    v: usize,
) -> Result<RankedFeatures> {
    let grad = model.class_gradient(x, v)?;
    let scale = model.input_scale();
    let scores: Vec<f64> = grad
        .iter()
        .zip(scale.iter())
        .map(|(g, s)| (g * s).abs())
        .collect();
    Ok(RankedFeatures::from_scores(&scores, RankingMode::Gradient))
}

/// Gradient ranking toward the nearest contrastive class. Falls back to index
/// order (flagged) when the model has no usable contrastive class or a zero gradient.
pub fn rank_gradient(model: &impl DifferentiableModel, x: &[f64]) -> Result<RankedFeatures> {
    match contrastive_class(model, x) {
        Ok(v) => rank_gradient_toward(model, x, v),
        Err(Error::NoContrastiveClass) => Ok(RankedFeatures::index_order(
            model.num_features(),
            RankingMode::Gradient,
        )),
        Err(e) => Err(e),
    }
}

/// Training points in the model's distance space with their model predictions.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub points: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
}

impl ReferenceSet {
    pub fn new(model: &impl DifferentiableModel, raw: &[Vec<f64>]) -> Result<Self> {
        let points = raw.iter().map(|x| model.to_metric(x)).collect();
        let probs = raw
            .iter()
            .map(|x| model.predict(x))
            .collect::<Result<Vec<_>>>()?;
        let predictions = probs.iter().map(|p| argmax(p)).collect();
        Ok(Self {
            points,
            probs,
            predictions,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For every predicted class, the `q` reference points nearest to `query`
/// (exhaustive Euclidean scan). Returned grouped by class, nearest first.
pub fn knn_neighborhood(reference: &ReferenceSet, query: &[f64], q: usize) -> Vec<usize> {
    let classes = reference
        .predictions
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for c in 0..classes {
        let mut members: Vec<(f64, usize)> = reference
            .predictions
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p == c)
            .map(|(i, _)| (squared_distance(&reference.points[i], query), i))
            .collect();
        // Ties on distance fall back to the point coordinates, so the chosen
        // points do not depend on row order.
        members.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| lexicographic(&reference.points[a.1], &reference.points[b.1]))
                .then(a.1.cmp(&b.1))
        });
        out.extend(members.into_iter().take(q).map(|(_, i)| i));
    }
    out
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

pub const SURROGATE_ITERATIONS: usize = 500;
pub const SURROGATE_STEP: f64 = 0.1;

/// Multinomial logistic model fit to a neighborhood's soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSurrogate {
    /// `weights[c][j]`: class `c`, feature `j`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Reference-set indices the surrogate was fit on.
    pub neighborhood: Vec<usize>,
}

impl LocalSurrogate {
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).fold(*b, |acc, (wi, xi)| acc + wi * xi))
            .collect();
        crate::nn::softmax(&logits)
    }
}

/// Minimizes `-(1/|Q|) sum_x sum_c f_c(x) log g_c(x)` by full-batch gradient
/// descent from zero weights.
pub fn fit_local_surrogate(points: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<LocalSurrogate> {
    if points.len() != targets.len() {
        return Err(Error::Shape {
            expected: points.len(),
            actual: targets.len(),
        });
    }
    let mut seen: Vec<usize> = targets.iter().map(|t| argmax(t)).collect();
    seen.sort_unstable();
    seen.dedup();
    if points.len() < 2 || seen.len() < 2 {
        return Err(Error::DegenerateSurrogate);
    }
    let m = points[0].len();
    let z = targets[0].len();
    let mut weights = vec![vec![0.0; m]; z];
    let mut bias = vec![0.0; z];
    let n = points.len() as f64;
    let mut model = LocalSurrogate {
        weights: weights.clone(),
        bias: bias.clone(),
        neighborhood: Vec::new(),
    };
    for _ in 0..SURROGATE_ITERATIONS {
        let mut gw = vec![vec![0.0; m]; z];
        let mut gb = vec![0.0; z];
        for (x, t) in points.iter().zip(targets) {
            let p = model.predict(x);
            for c in 0..z {
                let err = p[c] - t[c];
                gb[c] += err;
                for (g, &xi) in gw[c].iter_mut().zip(x) {
                    *g += err * xi;
                }
            }
        }
        for c in 0..z {
            bias[c] -= SURROGATE_STEP * gb[c] / n;
            for (w, g) in weights[c].iter_mut().zip(&gw[c]) {
                *w -= SURROGATE_STEP * g / n;
            }
        }
        model.weights.clone_from(&weights);
        model.bias.clone_from(&bias);
    }
    Ok(model)
}

/// Ranks features by `|w_v[j] - w_current[j]|`.
pub fn rank_local(
    surrogate: &LocalSurrogate,
    current: usize,
    contrastive: usize,
) -> Result<RankedFeatures> {
    let z = surrogate.weights.len();
    for c in [current, contrastive] {
        if c >= z {
            return Err(Error::InvalidClass {
                index: c,
                classes: z,
            });
        }
    }
    if current == contrastive {
        return Err(Error::Contract(
            "current and contrastive class must differ".into(),
        ));
    }
    let scores: Vec<f64> = surrogate.weights[contrastive]
        .iter()
        .zip(&surrogate.weights[current])
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(RankedFeatures::from_scores(&scores, RankingMode::Local))
}
