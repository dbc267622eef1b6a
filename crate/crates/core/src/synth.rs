//! Seeded synthetic datasets for desk-scale experiments.
//!
//! `diabetes_like` and `cancer_like` mimic the size, feature types, value ranges
//! and class balance of the Pima diabetes and Wisconsin breast-cancer tables;
//! `duplicated` carries exact copies of informative columns; `separable` is a
//! two-feature toy problem with the rule `x1 > 0.5`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Dtype};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    DiabetesLike,
    CancerLike,
    Duplicated,
    Separable,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [
        SynthKind::DiabetesLike,
        SynthKind::CancerLike,
        SynthKind::Duplicated,
        SynthKind::Separable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::DiabetesLike => "diabetes",
            SynthKind::CancerLike => "cancer",
            SynthKind::Duplicated => "duplicated",
            SynthKind::Separable => "separable",
        }
    }

    pub fn default_rows(self) -> usize {
        match self {
            SynthKind::DiabetesLike => 768,
            SynthKind::CancerLike => 699,
            SynthKind::Duplicated => 800,
            SynthKind::Separable => 400,
        }
    }

    pub fn generate(self, rows: usize, seed: u64) -> Result<Dataset> {
        match self {
            SynthKind::DiabetesLike => diabetes_like(rows, seed),
            SynthKind::CancerLike => cancer_like(rows, seed),
            SynthKind::Duplicated => duplicated(rows, seed),
            SynthKind::Separable => separable(rows, seed),
        }
    }

    /// Network settings used for this kind in experiments.
    pub fn train_config(self, seed: u64) -> TrainConfig {
        let base = TrainConfig {
            rng_seed: seed,
            ..TrainConfig::default()
        };
        match self {
            SynthKind::DiabetesLike => TrainConfig {
                hidden_sizes: [15, 7],
                batch_size: 64,
                learning_rate: 0.01,
                early_stopping_patience: 3,
                ..base
            },
            SynthKind::CancerLike => TrainConfig {
                hidden_sizes: [15, 15],
                batch_size: 64,
                learning_rate: 0.001,
                early_stopping_patience: 3,
                ..base
            },
            SynthKind::Duplicated | SynthKind::Separable => TrainConfig {
                hidden_sizes: [16, 8],
                batch_size: 64,
                learning_rate: 0.005,
                early_stopping_patience: 6,
                ..base
            },
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown synthetic dataset '{s}'")))
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn int_hints(names: &[String]) -> BTreeMap<String, Dtype> {
    names.iter().map(|n| (n.clone(), Dtype::Integer)).collect()
}

/// Eight clinical-style features, about 35% positives, Bayes accuracy near 0.8.
pub fn diabetes_like(rows: usize, seed: u64) -> Result<Dataset> {
    let feature_names = names(&[
        "pregnancies",
        "glucose",
        "blood_pressure",
        "skin_thickness",
        "insulin",
        "bmi",
        "pedigree",
        "age",
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    // Relative weights of glucose, bmi, age, pedigree, pregnancies in the risk score.
    let weights = [1.0, 0.55, 0.35, 0.3, 0.2];
    let wnorm = weights.iter().map(|w: &f64| w * w).sum::<f64>().sqrt();
    for _ in 0..rows {
        let z_age: f64 = std.sample(&mut rng);
        let age = (21.0 + 12.0 * z_age.abs()).round().min(81.0);
        let z_age_eff = (age - 33.0) / 11.0;
        let z_preg: f64 = std.sample(&mut rng);
        let pregnancies = ((age - 21.0) / 5.0 + 2.5 * z_preg).round().clamp(0.0, 17.0);
        let z_glu: f64 = std.sample(&mut rng);
        let glucose = (121.0 + 30.0 * z_glu).round().clamp(44.0, 199.0);
        let z_bmi: f64 = std.sample(&mut rng);
        let bmi = ((32.4 + 6.9 * z_bmi).clamp(18.2, 67.1) * 10.0).round() / 10.0;
        let z_ped: f64 = std.sample(&mut rng);
        let pedigree = ((-0.9 + 0.6 * z_ped).exp().clamp(0.078, 2.42) * 1000.0).round() / 1000.0;
        let bp_noise: f64 = std.sample(&mut rng);
        let blood_pressure = (72.0 + 4.0 * z_bmi + 11.0 * bp_noise)
            .round()
            .clamp(24.0, 122.0);
        let skin_noise: f64 = std.sample(&mut rng);
        let skin = (29.0 + 5.0 * z_bmi + 8.5 * skin_noise)
            .round()
            .clamp(7.0, 99.0);
        let ins_noise: f64 = std.sample(&mut rng);
        let insulin = (4.8 + 0.25 * z_glu + 0.55 * ins_noise)
            .exp()
            .round()
            .clamp(14.0, 846.0);

        let score = (weights[0] * z_glu
            + weights[1] * z_bmi
            + weights[2] * z_age_eff
            + weights[3] * z_ped
            + weights[4] * (pregnancies - 3.8) / 3.4)
            / wnorm;
        let p = sigmoid(-0.85 + 2.2 * score);
        labels.push(usize::from(rng.random::<f64>() < p));
        data.push(vec![
            pregnancies,
            glucose,
            blood_pressure,
            skin,
            insulin,
            bmi,
            pedigree,
            age,
        ]);
    }
    let mut hints = int_hints(&feature_names);
    hints.insert("bmi".into(), Dtype::Real);
    hints.insert("pedigree".into(), Dtype::Real);
    Dataset::from_rows(
        feature_names,
        names(&["negative", "positive"]),
        data,
        labels,
        &hints,
    )
}

/// Nine cytology scores on a 1..=10 scale, about 35% malignant, nearly separable.
pub fn cancer_like(rows: usize, seed: u64) -> Result<Dataset> {
    let feature_names = names(&[
        "clump_thickness",
        "cell_size_uniformity",
        "cell_shape_uniformity",
        "marginal_adhesion",
        "single_epithelial_cell_size",
        "bare_nuclei",
        "bland_chromatin",
        "normal_nucleoli",
        "mitoses",
    ]);
    // Per-feature loading on the latent severity and noise level.
    let loading = [0.9, 1.0, 1.0, 0.8, 0.75, 1.0, 0.8, 0.85, 0.4];
    let noise = [1.8, 1.3, 1.3, 2.0, 1.6, 2.2, 1.6, 2.2, 1.2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let malignant = rng.random::<f64>() < 0.345;
        let z: f64 = std.sample(&mut rng);
        let severity = if malignant {
            6.0 + 1.8 * z
        } else {
            0.8 + 0.9 * z.abs()
        };
        let row: Vec<f64> = loading
            .iter()
            .zip(&noise)
            .map(|(&l, &s)| {
                let e: f64 = std.sample(&mut rng);
                (1.0 + l * severity + s * e * if malignant { 1.0 } else { 0.45 })
                    .round()
                    .clamp(1.0, 10.0)
            })
            .collect();
        // A few mislabeled records keep the problem from being perfectly separable.
        let flip = rng.random::<f64>() < 0.01;
        labels.push(usize::from(malignant ^ flip));
        data.push(row);
    }
    let hints = int_hints(&feature_names);
    Dataset::from_rows(
        feature_names,
        names(&["benign", "malignant"]),
        data,
        labels,
        &hints,
    )
}

/// Four real features in `[0, 1]` plus exact copies of the first two.
pub fn duplicated(rows: usize, seed: u64) -> Result<Dataset> {
    let feature_names = names(&["a", "b", "c", "d", "a_copy", "b_copy"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let base: Vec<f64> = (0..4)
            .map(|_| (rng.random::<f64>() * 1000.0).round() / 1000.0)
            .collect();
        let score = base[0] + base[1] + 0.6 * base[2] + 0.2 * base[3];
        labels.push(usize::from(score > 1.4));
        let mut row = base.clone();
        row.push(base[0]);
        row.push(base[1]);
        data.push(row);
    }
    let hints = feature_names
        .iter()
        .map(|n| (n.clone(), Dtype::Real))
        .collect();
    Dataset::from_rows(feature_names, names(&["low", "high"]), data, labels, &hints)
}

/// Two uniform features; the label is `x1 > 0.5` with a margin around the boundary.
pub fn separable(rows: usize, seed: u64) -> Result<Dataset> {
    let feature_names = names(&["x0", "x1"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    while data.len() < rows {
        let x0 = (rng.random::<f64>() * 1000.0).round() / 1000.0;
        let x1 = (rng.random::<f64>() * 1000.0).round() / 1000.0;
        if (x1 - 0.5).abs() < 0.05 {
            continue;
        }
        labels.push(usize::from(x1 > 0.5));
        data.push(vec![x0, x1]);
    }
    let hints = feature_names
        .iter()
        .map(|n| (n.clone(), Dtype::Real))
        .collect();
    Dataset::from_rows(
        feature_names,
        names(&["below", "above"]),
        data,
        labels,
        &hints,
    )
}

/// Writes `dataset` as CSV with the label in a final `label` column.
pub fn to_csv(dataset: &Dataset) -> String {
    let mut out = dataset.feature_names.join(",");
    out.push_str(",label\n");
    for (row, &y) in dataset.rows.iter().zip(&dataset.labels) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&dataset.class_names[y]);
        out.push('\n');
    }
    out
}

/// A manifest pointing at `csv_name` with the dataset's dtypes spelled out and,
/// when given, the network settings to train with.
pub fn manifest_toml(dataset: &Dataset, csv_name: &str, train: Option<&TrainConfig>) -> String {
    let mut out = format!("csv = \"{csv_name}\"\nlabel = \"label\"\n\n[dtypes]\n");
    for d in &dataset.domains {
        let t = match d.dtype {
            Dtype::Integer => "integer",
            Dtype::Real => "real",
        };
        out.push_str(&format!("{} = \"{t}\"\n", d.name));
    }
    if let Some(c) = train {
        out.push_str(&format!(
            "\n[train]\nhidden_sizes = [{}, {}]\nbatch_size = {}\nlearning_rate = {:?}\nearly_stopping_patience = {}\nmax_epochs = {}\n",
            c.hidden_sizes[0],
            c.hidden_sizes[1],
            c.batch_size,
            c.learning_rate,
            c.early_stopping_patience,
            c.max_epochs
        ));
    }
    out
}
