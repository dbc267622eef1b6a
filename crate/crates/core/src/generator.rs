//! Contrastive sample generation.
//!
//! Starting from `x`, the generator repeatedly projects the current sample toward
//! the decision hyperplane between the predicted class `C` and the nearest
//! contrastive class `v`, moving only the features in a chosen subset `S` and
//! projecting the result back onto the feature domains after every step. The outer
//! search grows `S` one ranked feature at a time, up to `K` features, until the
//! prediction flips.
//!
//! Projection geometry uses the model's [`DifferentiableModel::input_scale`]: for
//! a [`crate::model::Classifier`] that is the normalized feature space, while the
//! sample itself and all domain checks stay in raw feature units.

use serde::{Deserialize, Serialize};

use crate::data::FeatureDomain;
use crate::entropy::{entropy_filter, SuMatrix};
use crate::error::{Error, Result};
use crate::model::{argmax, DifferentiableModel};
use crate::ranking::{
    fit_local_surrogate, knn_neighborhood, rank_gradient_toward, rank_local, RankedFeatures,
    RankingMode, ReferenceSet,
};

/// Gradient-difference norms below this are treated as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Added to the score gap of every applied step so a sample sitting exactly on
/// the boundary still moves across it.
pub const MIN_PUSH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    /// `f_C` and its gradient are taken at the original sample.
    Original,
    /// `f_C` and its gradient are re-evaluated at the current iterate.
    Current,
}

impl std::str::FromStr for Anchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Self::Original),
            "current" => Ok(Self::Current),
            other => Err(Error::Config(format!("unknown anchor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Maximum number of perturbed features (`K`).
    pub max_features: usize,
    /// Upper bound on pairwise SU among perturbed features.
    pub gamma: f64,
    /// Projection iterations per attempt.
    pub steps: usize,
    pub mode: RankingMode,
    pub overshoot: f64,
    pub anchor: Anchor,
    /// Neighbors per predicted class for local ranking.
    pub neighbors: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            max_features: 5,
            gamma: 0.5,
            steps: 200,
            mode: RankingMode::Gradient,
            overshoot: 1.02,
            anchor: Anchor::Original,
            neighbors: 4,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma {} is outside [0, 1]",
                self.gamma
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.overshoot >= 1.0 && self.overshoot.is_finite()) {
            return Err(Error::Config("overshoot must be at least 1".into()));
        }
        if self.neighbors == 0 {
            return Err(Error::Config("neighbors must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scores and input gradients, with gradients expressed in the projection metric.
fn scaled_jacobian(
    model: &impl DifferentiableModel,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (scores, mut grads) = model.jacobian(x)?;
    let scale = model.input_scale();
    for g in grads.iter_mut() {
        for (v, s) in g.iter_mut().zip(scale.iter()) {
            *v *= s;
        }
    }
    Ok((scores, grads))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// The class across the nearest linearized boundary:
/// `argmin_{c != C} |f_c - f_C| / ||grad f_c - grad f_C||`.
pub fn contrastive_class(model: &impl DifferentiableModel, x: &[f64]) -> Result<usize> {
    if model.num_classes() < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    let (scores, grads) = scaled_jacobian(model, x)?;
    let current = argmax(&scores);
    let mut best: Option<(usize, f64)> = None;
    for c in (0..model.num_classes()).filter(|&c| c != current) {
        let n = norm(&diff(&grads[c], &grads[current]));
        if n < DEGENERATE_NORM {
            continue;
        }
        let dist = (scores[c] - scores[current]).abs() / n;
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((c, dist));
        }
    }
    best.map(|(c, _)| c).ok_or(Error::NoContrastiveClass)
}

/// One linearized projection toward the `C`/`v` boundary, in metric units.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `|f_v(x_cur) - f_C(anchor)|`.
    pub gap: f64,
    /// `grad f_v(x_cur) - grad f_C(anchor)`.
    pub direction: Vec<f64>,
    pub norm_sq: f64,
}

impl Projection {
    /// `r_v = gap / ||d||^2 * d`.
    pub fn vector(&self) -> Vec<f64> {
        let k = self.gap / self.norm_sq;
        self.direction.iter().map(|d| k * d).collect()
    }

    /// The step actually applied: `overshoot * (gap + MIN_PUSH) / ||d||^2 * d`.
    pub fn step(&self, overshoot: f64) -> Vec<f64> {
        let k = overshoot * (self.gap + MIN_PUSH) / self.norm_sq;
        self.direction.iter().map(|d| k * d).collect()
    }
}

struct AnchorPoint {
    score: f64,
    grad: Vec<f64>,
}

fn projection_from(
    scores: &[f64],
    grads: &[Vec<f64>],
    v: usize,
    anchor: &AnchorPoint,
) -> Result<Projection> {
    let direction = diff(&grads[v], &anchor.grad);
    let norm_sq: f64 = direction.iter().map(|d| d * d).sum();
    if norm_sq.sqrt() < DEGENERATE_NORM {
        return Err(Error::DegenerateStep);
    }
    Ok(Projection {
        gap: (scores[v] - anchor.score).abs(),
        direction,
        norm_sq,
    })
}

/// The orthogonal projection of `x_prev` toward the boundary between `current`
/// (evaluated at `x_orig` or `x_prev` per `anchor`) and `v`.
pub fn projection_step(
    model: &impl DifferentiableModel,
    x_prev: &[f64],
    x_orig: &[f64],
    v: usize,
    current: usize,
    anchor: Anchor,
) -> Result<Projection> {
    if v == current {
        return Err(Error::Contract(
            "contrastive class equals current class".into(),
        ));
    }
    let z = model.num_classes();
    for c in [v, current] {
        if c >= z {
            return Err(Error::InvalidClass {
                index: c,
                classes: z,
            });
        }
    }
    let (scores, grads) = scaled_jacobian(model, x_prev)?;
    let anchor_point = match anchor {
        Anchor::Current => AnchorPoint {
            score: scores[current],
            grad: grads[current].clone(),
        },
        Anchor::Original => {
            let (s0, g0) = scaled_jacobian(model, x_orig)?;
            AnchorPoint {
                score: s0[current],
                grad: g0[current].clone(),
            }
        }
    };
    projection_from(&scores, &grads, v, &anchor_point)
}

/// Projects every feature of `x` onto its domain.
pub fn project_domain(x: &[f64], domains: &[FeatureDomain]) -> Vec<f64> {
    crate::data::project_domain(x, domains)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub x_tilde: Vec<f64>,
    pub success: bool,
    pub iterations: usize,
    pub original_class: usize,
    pub contrastive_class: usize,
}

/// Options for [`perturb`] beyond the feature subset.
#[derive(Debug, Clone, Copy)]
pub struct PerturbOptions<'a> {
    pub steps: usize,
    pub overshoot: f64,
    pub anchor: Anchor,
    /// `None` disables domain projection.
    pub domains: Option<&'a [FeatureDomain]>,
}

/// The projection loop shared by the generator and the unconstrained baseline.
/// Only features in `subset` move; every other coordinate is copied from `x`.
pub fn perturb(
    model: &impl DifferentiableModel,
    x: &[f64],
    subset: &[usize],
    opts: PerturbOptions<'_>,
) -> Result<Candidate> {
    let m = model.num_features();
    if x.len() != m {
        return Err(Error::Shape {
            expected: m,
            actual: x.len(),
        });
    }
    if subset.is_empty() {
        return Err(Error::Contract("feature subset is empty".into()));
    }
    if let Some(&bad) = subset.iter().find(|&&j| j >= m) {
        return Err(Error::InvalidFeature {
            index: bad,
            features: m,
        });
    }
    if let Some(d) = opts.domains {
        if d.len() != m {
            return Err(Error::Shape {
                expected: m,
                actual: d.len(),
            });
        }
    }

    let (scores0, grads0) = scaled_jacobian(model, x)?;
    let current = argmax(&scores0);
    let v = contrastive_class(model, x)?;
    let original_anchor = AnchorPoint {
        score: scores0[current],
        grad: grads0[current].clone(),
    };
    let scale = model.input_scale();

    let mut x_tilde = x.to_vec();
    // Unrounded positions of the perturbed features; integer features only
    // round when emitted, so steps smaller than half a unit still accumulate.
    let mut shadow = x.to_vec();
    let (mut scores, mut grads) = (scores0, grads0);
    let mut iterations = 0;
    let mut success = false;
    while iterations < opts.steps {
        if argmax(&scores) != current {
            success = true;
            break;
        }
        let current_anchor;
        let anchor = match opts.anchor {
            Anchor::Original => &original_anchor,
            Anchor::Current => {
                current_anchor = AnchorPoint {
                    score: scores[current],
                    grad: grads[current].clone(),
                };
                &current_anchor
            }
        };
        let projection = match projection_from(&scores, &grads, v, anchor) {
            Ok(p) => p,
            Err(Error::DegenerateStep) => break,
            Err(e) => return Err(e),
        };
        let step = projection.step(opts.overshoot);
        for &j in subset {
            let moved = shadow[j] + step[j] * scale[j];
            match opts.domains {
                Some(domains) => {
                    let d = &domains[j];
                    shadow[j] = moved.clamp(d.min, d.max);
                    x_tilde[j] = d.project(shadow[j]);
                }
                None => {
                    shadow[j] = moved;
                    x_tilde[j] = moved;
                }
            }
        }
        iterations += 1;
        (scores, grads) = scaled_jacobian(model, &x_tilde)?;
    }
    if !success && argmax(&scores) != current {
        success = true;
    }
    Ok(Candidate {
        x_tilde,
        success,
        iterations,
        original_class: current,
        contrastive_class: v,
    })
}

/// Perturbs only the features in `subset`, projecting onto `domains` after every step.
pub fn generate_contrastive(
    model: &impl DifferentiableModel,
    x: &[f64],
    subset: &[usize],
    domains: &[FeatureDomain],
    config: &GenerationConfig,
) -> Result<Candidate> {
    config.validate()?;
    perturb(
        model,
        x,
        subset,
        PerturbOptions {
            steps: config.steps,
            overshoot: config.overshoot,
            anchor: config.anchor,
            domains: Some(domains),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// Every gradient score was zero; features were taken in index order.
    ZeroGradientRanking,
    /// The neighborhood covered a single predicted class; gradient ranking was used.
    SurrogateDegenerate,
    /// Local ranking was requested without reference points; gradient ranking was used.
    NoReferenceSet,
    /// No class had a usable gradient difference; nothing was generated.
    NoContrastiveClass,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = match self {
            Warning::ZeroGradientRanking => "all ranking gradients are zero; using feature index order",
            Warning::SurrogateDegenerate => {
                "local neighborhood covers a single predicted class; falling back to gradient ranking"
            }
            Warning::NoReferenceSet => "no reference points for local ranking; falling back to gradient ranking",
            Warning::NoContrastiveClass => "no contrastive class with a usable gradient",
        };
        f.write_str(msg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastiveResult {
    pub x_tilde: Vec<f64>,
    /// `argmax f(x_tilde)`.
    pub y_tilde: usize,
    pub original_class: usize,
    pub contrastive_class: Option<usize>,
    /// Perturbed features in ranking order.
    pub features: Vec<usize>,
    pub success: bool,
    /// Projection iterations of the returned attempt.
    pub iterations: usize,
    pub total_iterations: usize,
    /// Size of the feature subset of the returned attempt.
    pub k_used: usize,
    pub ranking: Option<RankedFeatures>,
    pub filtered: Vec<usize>,
    pub warnings: Vec<Warning>,
}

/// Everything generation needs besides the sample itself.
pub struct GraceContext<'a, M> {
    pub model: &'a M,
    pub domains: &'a [FeatureDomain],
    pub su: &'a SuMatrix,
    /// Training points for local ranking.
    pub reference: Option<&'a ReferenceSet>,
}

impl<M> Clone for GraceContext<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M> Copy for GraceContext<'_, M> {}

impl<'a, M: DifferentiableModel> GraceContext<'a, M> {
    /// The ordered feature list for `x`, plus any fallback warnings.
    pub fn rank(
        &self,
        x: &[f64],
        current: usize,
        v: usize,
        config: &GenerationConfig,
    ) -> Result<(RankedFeatures, Vec<Warning>)> {
        let mut warnings = Vec::new();
        if config.mode == RankingMode::Local {
            match self.reference {
                Some(reference) => {
                    let query = self.model.to_metric(x);
                    let hood = knn_neighborhood(reference, &query, config.neighbors);
                    let points: Vec<Vec<f64>> =
                        hood.iter().map(|&i| reference.points[i].clone()).collect();
                    let targets: Vec<Vec<f64>> =
                        hood.iter().map(|&i| reference.probs[i].clone()).collect();
                    match fit_local_surrogate(&points, &targets) {
                        Ok(mut surrogate) => {
                            surrogate.neighborhood = hood;
                            let ranked = rank_local(&surrogate, current, v)?;
                            if ranked.fallback {
                                warnings.push(Warning::ZeroGradientRanking);
                            }
                            return Ok((ranked, warnings));
                        }
                        Err(Error::DegenerateSurrogate) => {
                            warnings.push(Warning::SurrogateDegenerate)
                        }
                        Err(e) => return Err(e),
                    }
                }
                None => warnings.push(Warning::NoReferenceSet),
            }
        }
        let ranked = rank_gradient_toward(self.model, x, v)?;
        if ranked.fallback {
            warnings.push(Warning::ZeroGradientRanking);
        }
        Ok((ranked, warnings))
    }
}

/// Ranks, filters for redundancy, then tries `S = U*[:k]` for `k = 1..=min(K, |U*|)`,
/// returning the first sample that flips the prediction.
pub fn grace<M: DifferentiableModel>(
    ctx: GraceContext<'_, M>,
    x: &[f64],
    config: &GenerationConfig,
) -> Result<ContrastiveResult> {
    config.validate()?;
    let model = ctx.model;
    let scores = model.predict(x)?;
    let current = argmax(&scores);
    if ctx.domains.len() != model.num_features() {
        return Err(Error::Shape {
            expected: model.num_features(),
            actual: ctx.domains.len(),
        });
    }

    let v = match contrastive_class(model, x) {
        Ok(v) => v,
        Err(Error::NoContrastiveClass) => {
            return Ok(ContrastiveResult {
                x_tilde: x.to_vec(),
                y_tilde: current,
                original_class: current,
                contrastive_class: None,
                features: Vec::new(),
                success: false,
                iterations: 0,
                total_iterations: 0,
                k_used: 0,
                ranking: None,
                filtered: Vec::new(),
                warnings: vec![Warning::NoContrastiveClass],
            })
        }
        Err(e) => return Err(e),
    };

    let (ranking, warnings) = ctx.rank(x, current, v, config)?;
    let filtered = entropy_filter(&ranking.order, config.gamma, ctx.su)?;
    let k_max = config.max_features.min(filtered.len());

    let mut total_iterations = 0;
    let mut last: Option<(Candidate, usize)> = None;
    for k in 1..=k_max {
        let candidate = generate_contrastive(model, x, &filtered[..k], ctx.domains, config)?;
        total_iterations += candidate.iterations;
        let done = candidate.success;
        last = Some((candidate, k));
        if done {
            break;
        }
    }

    let (candidate, k_used) = match last {
        Some(pair) => pair,
        None => (
            Candidate {
                x_tilde: x.to_vec(),
                success: false,
                iterations: 0,
                original_class: current,
                contrastive_class: v,
            },
            0,
        ),
    };
    let y_tilde = model.predict_class(&candidate.x_tilde)?;
    Ok(ContrastiveResult {
        success: candidate.success && y_tilde != current,
        x_tilde: candidate.x_tilde,
        y_tilde,
        original_class: current,
        contrastive_class: Some(v),
        features: filtered[..k_used].to_vec(),
        iterations: candidate.iterations,
        total_iterations,
        k_used,
        ranking: Some(ranking),
        filtered,
        warnings,
    })
}
