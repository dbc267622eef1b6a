//! Explanation quality statistics and the two comparison baselines.

use serde::{Deserialize, Serialize};

use crate::data::{within_domain, FeatureDomain};
use crate::entropy::SuMatrix;
use crate::error::{Error, Result};
use crate::generator::{perturb, Anchor, ContrastiveResult, PerturbOptions};
use crate::model::{argmax, DifferentiableModel};
use crate::ranking::{squared_distance, ReferenceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "grace-gradient")]
    GraceGradient,
    #[serde(rename = "grace-local")]
    GraceLocal,
    #[serde(rename = "deepfool")]
    DeepFool,
    #[serde(rename = "nearestct")]
    NearestCt,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::GraceGradient,
        Method::GraceLocal,
        Method::DeepFool,
        Method::NearestCt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GraceGradient => "grace-gradient",
            Method::GraceLocal => "grace-local",
            Method::DeepFool => "deepfool",
            Method::NearestCt => "nearestct",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// One generation attempt as seen by the metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    /// The label the method claims for `x_tilde`.
    pub claimed: usize,
    pub original_class: usize,
    /// Perturbed features (the attempted set for failures).
    pub features: Vec<usize>,
    pub success: bool,
}

impl Outcome {
    pub fn from_result(x: &[f64], r: &ContrastiveResult) -> Self {
        Self {
            x: x.to_vec(),
            x_tilde: r.x_tilde.clone(),
            claimed: r.y_tilde,
            original_class: r.original_class,
            features: r.features.clone(),
            success: r.success,
        }
    }
}

fn require_nonempty<T>(items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Empty("no generation results".into()));
    }
    Ok(())
}

/// Mean that does not depend on the order of `values`.
fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values.into_iter().sum::<f64>() / n
}

/// Share of outcomes whose claimed label is the model's prediction on `x_tilde`
/// and differs from the original prediction.
pub fn fidelity(outcomes: &[Outcome], model: &impl DifferentiableModel) -> Result<f64> {
    require_nonempty(outcomes)?;
    let hits = outcomes
        .iter()
        .map(|o| {
            let ok = o.success
                && o.claimed != o.original_class
                && model.predict_class(&o.x_tilde)? == o.claimed;
            Ok(if ok { 1.0 } else { 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(order_free_mean(hits))
}

/// Mean `|S|` over all outcomes, failures included.
pub fn avg_num_feats(outcomes: &[Outcome]) -> Result<f64> {
    require_nonempty(outcomes)?;
    Ok(order_free_mean(
        outcomes.iter().map(|o| o.features.len() as f64).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoGainVariant {
    /// `sum_{i,j in S} SU(i, j) / |S|^2`, diagonal included.
    Literal,
    /// `sum_{i != j} SU(i, j) / (|S| (|S| - 1))`; zero for `|S| <= 1`.
    Offdiag,
}

impl std::str::FromStr for InfoGainVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "offdiag" => Ok(Self::Offdiag),
            other => Err(Error::Config(format!(
                "unknown info-gain variant '{other}'"
            ))),
        }
    }
}

/// Mean pairwise SU within one feature set.
pub fn redundancy(features: &[usize], su: &SuMatrix, variant: InfoGainVariant) -> Result<f64> {
    let n = features.len();
    let mut total = 0.0;
    for &i in features {
        for &j in features {
            if variant == InfoGainVariant::Offdiag && i == j {
                continue;
            }
            total += su.get(i, j)?;
        }
    }
    Ok(match variant {
        InfoGainVariant::Literal if n == 0 => 0.0,
        InfoGainVariant::Literal => total / (n * n) as f64,
        InfoGainVariant::Offdiag if n <= 1 => 0.0,
        InfoGainVariant::Offdiag => total / (n * (n - 1)) as f64,
    })
}

/// `1 - mean redundancy` over all outcomes.
pub fn info_gain_metric(
    outcomes: &[Outcome],
    su: &SuMatrix,
    variant: InfoGainVariant,
) -> Result<f64> {
    require_nonempty(outcomes)?;
    let per = outcomes
        .iter()
        .map(|o| redundancy(&o.features, su, variant))
        .collect::<Result<Vec<_>>>()?;
    Ok(1.0 - order_free_mean(per))
}

/// Share of samples inside every feature domain.
pub fn domain_rate(outcomes: &[Outcome], domains: &[FeatureDomain]) -> Result<f64> {
    require_nonempty(outcomes)?;
    Ok(order_free_mean(
        outcomes
            .iter()
            .map(|o| {
                if within_domain(&o.x_tilde, domains) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    ))
}

/// `fidelity * info_gain * domain / avg_num_feats`.
pub fn influence_metric(
    fidelity: f64,
    info_gain: f64,
    domain: f64,
    avg_num_feats: f64,
) -> Result<f64> {
    if avg_num_feats.is_nan() || avg_num_feats <= 0.0 {
        return Err(Error::Contract(
            "influence is undefined when no feature was perturbed".into(),
        ));
    }
    Ok(fidelity * info_gain * domain / avg_num_feats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub fidelity: f64,
    pub avg_num_feats: f64,
    pub info_gain: f64,
    /// `info_gain * fidelity`.
    pub info_gain_star: f64,
    pub domain: f64,
    pub influence: f64,
    pub count: usize,
    pub successes: usize,
}

impl MetricsReport {
    pub fn compute(
        method: Method,
        outcomes: &[Outcome],
        model: &impl DifferentiableModel,
        su: &SuMatrix,
        domains: &[FeatureDomain],
        variant: InfoGainVariant,
    ) -> Result<Self> {
        let fid = fidelity(outcomes, model)?;
        let avg = avg_num_feats(outcomes)?;
        let ig = info_gain_metric(outcomes, su, variant)?;
        let dom = domain_rate(outcomes, domains)?;
        let influence = if avg > 0.0 {
            influence_metric(fid, ig, dom, avg)?
        } else {
            0.0
        };
        Ok(Self {
            method,
            fidelity: fid,
            avg_num_feats: avg,
            info_gain: ig,
            info_gain_star: ig * fid,
            domain: dom,
            influence,
            count: outcomes.len(),
            successes: outcomes.iter().filter(|o| o.success).count(),
        })
    }

    /// Field-wise mean of several reports of the same method.
    pub fn average(reports: &[MetricsReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Empty("no reports to average".into()))?;
        let mean = |f: fn(&MetricsReport) -> f64| {
            reports.iter().map(f).sum::<f64>() / reports.len() as f64
        };
        Ok(Self {
            method: first.method,
            fidelity: mean(|r| r.fidelity),
            avg_num_feats: mean(|r| r.avg_num_feats),
            info_gain: mean(|r| r.info_gain),
            info_gain_star: mean(|r| r.info_gain_star),
            domain: mean(|r| r.domain),
            influence: mean(|r| r.influence),
            count: reports.iter().map(|r| r.count).sum(),
            successes: reports.iter().map(|r| r.successes).sum(),
        })
    }
}

/// The closest training point (in the reference metric) whose prediction differs from `x`'s.
pub fn baseline_nearest_ct(
    model: &impl DifferentiableModel,
    reference: &ReferenceSet,
    train_raw: &[Vec<f64>],
    x: &[f64],
) -> Result<Outcome> {
    let current = model.predict_class(x)?;
    let query = model.to_metric(x);
    let best = reference
        .predictions
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p != current)
        .map(|(i, _)| (squared_distance(&reference.points[i], &query), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or(Error::NoContrastivePoint)?;
    let x_tilde = train_raw[best.1].clone();
    let features = (0..x.len()).filter(|&j| x[j] != x_tilde[j]).collect();
    Ok(Outcome {
        x: x.to_vec(),
        x_tilde,
        claimed: reference.predictions[best.1],
        original_class: current,
        features,
        success: true,
    })
}

/// Unconstrained projection on every feature, no domain projection. Reports all
/// `M` features as perturbed.
pub fn baseline_deepfool(
    model: &impl DifferentiableModel,
    x: &[f64],
    steps: usize,
    overshoot: f64,
    anchor: Anchor,
) -> Result<Outcome> {
    let m = model.num_features();
    let all: Vec<usize> = (0..m).collect();
    let current = argmax(&model.predict(x)?);
    let candidate = match perturb(
        model,
        x,
        &all,
        PerturbOptions {
            steps,
            overshoot,
            anchor,
            domains: None,
        },
    ) {
        Ok(c) => c,
        Err(Error::NoContrastiveClass) => {
            return Ok(Outcome {
                x: x.to_vec(),
                x_tilde: x.to_vec(),
                claimed: current,
                original_class: current,
                features: all,
                success: false,
            })
        }
        Err(e) => return Err(e),
    };
    let claimed = model.predict_class(&candidate.x_tilde)?;
    Ok(Outcome {
        x: x.to_vec(),
        x_tilde: candidate.x_tilde,
        claimed,
        original_class: current,
        features: all,
        success: candidate.success,
    })
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / predicted.len() as f64
}

/// Unweighted mean of per-class F1 over the classes that occur in either vector.
pub fn macro_f1(predicted: &[usize], truth: &[usize], num_classes: usize) -> f64 {
    let mut f1s = Vec::new();
    for c in 0..num_classes {
        let tp = predicted
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == c && t == c)
            .count() as f64;
        let fp = predicted
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == c && t != c)
            .count() as f64;
        let fneg = predicted
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p != c && t == c)
            .count() as f64;
        if tp + fp + fneg == 0.0 {
            continue;
        }
        f1s.push(2.0 * tp / (2.0 * tp + fp + fneg));
    }
    if f1s.is_empty() {
        0.0
    } else {
        f1s.iter().sum::<f64>() / f1s.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dtype;

    fn outcome(features: Vec<usize>, success: bool) -> Outcome {
        Outcome {
            x: vec![0.0; 3],
            x_tilde: vec![0.0; 3],
            claimed: 1,
            original_class: 0,
            features,
            success,
        }
    }

    fn independent_su() -> SuMatrix {
        SuMatrix::new(vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1], vec![0, 0, 1, 1]]).unwrap()
    }

    #[test]
    fn avg_feats() {
        assert_eq!(
            avg_num_feats(&vec![outcome(vec![0], true); 3]).unwrap(),
            1.0
        );
        assert_eq!(
            avg_num_feats(&[outcome(vec![0], true), outcome(vec![0, 1, 2], false)]).unwrap(),
            2.0
        );
        assert!(avg_num_feats(&[]).is_err());
    }

    #[test]
    fn info_gain_literal_cases() {
        let su = independent_su();
        let lit = InfoGainVariant::Literal;
        assert_eq!(
            info_gain_metric(&[outcome(vec![1], true)], &su, lit).unwrap(),
            0.0
        );
        assert_eq!(
            info_gain_metric(&[outcome(vec![0, 1], true)], &su, lit).unwrap(),
            0.5
        );
        assert_eq!(
            info_gain_metric(&[outcome(vec![0, 2], true)], &su, lit).unwrap(),
            0.0
        );
        assert_eq!(
            info_gain_metric(&[outcome(vec![], false)], &su, lit).unwrap(),
            1.0
        );
    }

    #[test]
    fn info_gain_offdiag_cases() {
        let su = independent_su();
        let off = InfoGainVariant::Offdiag;
        assert_eq!(
            info_gain_metric(&[outcome(vec![1], true)], &su, off).unwrap(),
            1.0
        );
        assert_eq!(
            info_gain_metric(&[outcome(vec![0, 1], true)], &su, off).unwrap(),
            1.0
        );
        assert_eq!(
            info_gain_metric(&[outcome(vec![0, 2], true)], &su, off).unwrap(),
            0.0
        );
    }

    #[test]
    fn influence_arithmetic() {
        assert_eq!(influence_metric(1.0, 0.5, 1.0, 2.0).unwrap(), 0.25);
        assert_eq!(influence_metric(0.0, 0.9, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(influence_metric(0.8, 0.0, 1.0, 2.0).unwrap(), 0.0);
        assert!(influence_metric(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn domain_rate_counts_violations() {
        let domains = vec![
            FeatureDomain::new("a", Dtype::Real, 0.0, 1.0).unwrap(),
            FeatureDomain::new("b", Dtype::Integer, 0.0, 5.0).unwrap(),
            FeatureDomain::new("c", Dtype::Real, 0.0, 1.0).unwrap(),
        ];
        let mut bad = outcome(vec![0], true);
        bad.x_tilde = vec![0.5, 7.0, 0.0];
        let good = outcome(vec![0], true);
        assert_eq!(domain_rate(&[good.clone(), bad], &domains).unwrap(), 0.5);
        assert_eq!(domain_rate(&[good], &domains).unwrap(), 1.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("lime".parse::<Method>().is_err());
    }

    #[test]
    fn classification_scores() {
        let p = [0, 1, 1, 0];
        let t = [0, 1, 0, 0];
        assert_eq!(accuracy(&p, &t), 0.75);
        // class 0: tp 2, fp 0, fn 1 -> 0.8; class 1: tp 1, fp 1, fn 0 -> 2/3
        assert!((macro_f1(&p, &t, 2) - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }
}
