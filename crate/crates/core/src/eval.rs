//! End-to-end runs: split, normalize, train, then explain every test row with
//! each method and aggregate the metrics.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{split, Dataset, Normalizer, SplitIndices};
use crate::entropy::SuMatrix;
use crate::error::{Error, Result};
use crate::generator::{grace, GenerationConfig, GraceContext};
use crate::metrics::{
    accuracy, baseline_deepfool, baseline_nearest_ct, macro_f1, InfoGainVariant, Method,
    MetricsReport, Outcome,
};
use crate::model::{Classifier, DifferentiableModel, Provenance};
use crate::nn::{train, Samples, TrainConfig};
use crate::ranking::{RankingMode, ReferenceSet};

/// A trained classifier together with everything derived from its training split.
#[derive(Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub split: SplitIndices,
    pub model: Classifier,
    pub su: SuMatrix,
    pub reference: ReferenceSet,
    pub train_rows: Vec<Vec<f64>>,
}

impl Prepared {
    /// Splits with `split_seed`, fits scaling on the training rows and trains a network.
    pub fn train(
        dataset: Dataset,
        ratios: [f64; 3],
        split_seed: u64,
        config: &TrainConfig,
    ) -> Result<Self> {
        let split = split(dataset.len(), ratios, split_seed)?;
        let train_set = dataset.subset(&split.train);
        let val_set = dataset.subset(&split.val);
        let normalizer = Normalizer::fit(&train_set.rows)?;
        let train_norm = normalizer.transform_all(&train_set.rows);
        let val_norm = normalizer.transform_all(&val_set.rows);
        let outcome = train(
            Samples::new(&train_norm, &train_set.labels),
            Samples::new(&val_norm, &val_set.labels),
            dataset.num_classes(),
            config,
        )?;
        let model = Classifier::new(
            outcome.net,
            normalizer,
            dataset.class_names.clone(),
            dataset.feature_names.clone(),
        )?
        .with_provenance(Provenance {
            split_seed,
            split_ratios: ratios,
            train_config: config.clone(),
        });
        Self::assemble(dataset, split, model)
    }

    /// Pairs a saved model with its dataset, re-deriving the split from the model's provenance.
    pub fn from_model(dataset: Dataset, model: Classifier) -> Result<Self> {
        if model.num_features() != dataset.num_features() {
            return Err(Error::Shape {
                expected: model.num_features(),
                actual: dataset.num_features(),
            });
        }
        let provenance = model
            .provenance
            .clone()
            .ok_or_else(|| Error::Config("model file does not record its training split".into()))?;
        let split = split(
            dataset.len(),
            provenance.split_ratios,
            provenance.split_seed,
        )?;
        Self::assemble(dataset, split, model)
    }

    fn assemble(dataset: Dataset, split: SplitIndices, model: Classifier) -> Result<Self> {
        let train_set = dataset.subset(&split.train);
        let train_norm = model.normalizer.transform_all(&train_set.rows);
        let su = SuMatrix::from_rows(&train_norm, &train_set.labels)?;
        let reference = ReferenceSet::new(&model, &train_set.rows)?;
        Ok(Self {
            dataset,
            split,
            model,
            su,
            reference,
            train_rows: train_set.rows,
        })
    }

    pub fn context(&self) -> GraceContext<'_, Classifier> {
        GraceContext {
            model: &self.model,
            domains: &self.dataset.domains,
            su: &self.su,
            reference: Some(&self.reference),
        }
    }

    pub fn predictions(&self, indices: &[usize]) -> Result<Vec<usize>> {
        indices
            .iter()
            .map(|&i| self.model.predict_class(&self.dataset.rows[i]))
            .collect()
    }

    /// Test-split accuracy and macro-F1.
    pub fn test_scores(&self) -> Result<(f64, f64)> {
        let pred = self.predictions(&self.split.test)?;
        let truth: Vec<usize> = self
            .split
            .test
            .iter()
            .map(|&i| self.dataset.labels[i])
            .collect();
        Ok((
            accuracy(&pred, &truth),
            macro_f1(&pred, &truth, self.dataset.num_classes()),
        ))
    }

    /// Explains one raw sample with `method`.
    pub fn explain_with(
        &self,
        method: Method,
        x: &[f64],
        config: &GenerationConfig,
    ) -> Result<Outcome> {
        match method {
            Method::GraceGradient | Method::GraceLocal => {
                let config = GenerationConfig {
                    mode: if method == Method::GraceLocal {
                        RankingMode::Local
                    } else {
                        RankingMode::Gradient
                    },
                    ..config.clone()
                };
                let result = grace(self.context(), x, &config)?;
                Ok(Outcome::from_result(x, &result))
            }
            Method::DeepFool => baseline_deepfool(
                &self.model,
                x,
                config.steps,
                config.overshoot,
                config.anchor,
            ),
            Method::NearestCt => {
                match baseline_nearest_ct(&self.model, &self.reference, &self.train_rows, x) {
                    // Every training point shares x's prediction: nothing to return.
                    Err(Error::NoContrastivePoint) => {
                        let current = self.model.predict_class(x)?;
                        Ok(Outcome {
                            x: x.to_vec(),
                            x_tilde: x.to_vec(),
                            claimed: current,
                            original_class: current,
                            features: Vec::new(),
                            success: false,
                        })
                    }
                    other => other,
                }
            }
        }
    }

    /// Outcomes for every test row, in test-split order.
    pub fn run_method(&self, method: Method, config: &GenerationConfig) -> Result<Vec<Outcome>> {
        if self.split.test.is_empty() {
            return Err(Error::EmptySplit("test"));
        }
        config.validate()?;
        self.split
            .test
            .par_iter()
            .map(|&i| self.explain_with(method, &self.dataset.rows[i], config))
            .collect()
    }

    pub fn evaluate(
        &self,
        method: Method,
        config: &GenerationConfig,
        variant: InfoGainVariant,
    ) -> Result<MetricsReport> {
        let outcomes = self.run_method(method, config)?;
        MetricsReport::compute(
            method,
            &outcomes,
            &self.model,
            &self.su,
            &self.dataset.domains,
            variant,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    K,
    Gamma,
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(Self::K),
            "gamma" => Ok(Self::Gamma),
            other => Err(Error::Config(format!("unknown sweep '{other}'"))),
        }
    }
}

pub const SWEEP_K: std::ops::RangeInclusive<usize> = 1..=10;
pub const SWEEP_GAMMA: [f64; 4] = [1.0, 0.7, 0.5, 0.3];

/// The generation settings visited by a sweep (or just `base` without one).
pub fn sweep_configs(base: &GenerationConfig, sweep: Option<Sweep>) -> Vec<GenerationConfig> {
    match sweep {
        None => vec![base.clone()],
        Some(Sweep::K) => SWEEP_K
            .map(|k| GenerationConfig {
                max_features: k,
                ..base.clone()
            })
            .collect(),
        Some(Sweep::Gamma) => SWEEP_GAMMA
            .iter()
            .map(|&gamma| GenerationConfig {
                gamma,
                ..base.clone()
            })
            .collect(),
    }
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: Method,
    pub k: usize,
    pub gamma: f64,
    pub runs: usize,
    pub report: MetricsReport,
}

pub const REPORT_HEADER: &str =
    "dataset,method,k,gamma,runs,fidelity,avg_num_feats,info_gain,info_gain_star,domain,influence,count,successes";

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.dataset,
            self.method,
            self.k,
            self.gamma,
            self.runs,
            r.fidelity,
            r.avg_num_feats,
            r.info_gain,
            r.info_gain_star,
            r.domain,
            r.influence,
            r.count,
            r.successes
        )
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Evaluates every method at every swept setting, averaging over prepared runs.
pub fn evaluate_runs(
    name: &str,
    runs: &[Prepared],
    methods: &[Method],
    base: &GenerationConfig,
    sweep: Option<Sweep>,
    variant: InfoGainVariant,
) -> Result<Vec<ReportRow>> {
    if runs.is_empty() {
        return Err(Error::Config("at least one run is required".into()));
    }
    let mut rows = Vec::new();
    for config in sweep_configs(base, sweep) {
        for &method in methods {
            let reports = runs
                .iter()
                .map(|p| p.evaluate(method, &config, variant))
                .collect::<Result<Vec<_>>>()?;
            rows.push(ReportRow {
                dataset: name.to_string(),
                method,
                k: config.max_features,
                gamma: config.gamma,
                runs: runs.len(),
                report: MetricsReport::average(&reports)?,
            });
        }
    }
    Ok(rows)
}
