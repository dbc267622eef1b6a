//! Tabular dataset loading, splitting, domain inference and min-max scaling.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Integer,
    Real,
}

/// Value range and type of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDomain {
    pub name: String,
    pub dtype: Dtype,
    pub min: f64,
    pub max: f64,
    /// Discretization cut points, in normalized units. Empty until discretized.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cut_points: Vec<f64>,
}

impl FeatureDomain {
    pub fn new(name: impl Into<String>, dtype: Dtype, min: f64, max: f64) -> Result<Self> {
        let name = name.into();
        if min.is_nan() || max.is_nan() || min > max {
            return Err(Error::Config(format!(
                "domain of '{name}' has min {min} > max {max}"
            )));
        }
        if dtype == Dtype::Integer && (min.fract() != 0.0 || max.fract() != 0.0) {
            return Err(Error::Config(format!(
                "integer domain of '{name}' has fractional bounds"
            )));
        }
        Ok(Self {
            name,
            dtype,
            min,
            max,
            cut_points: Vec::new(),
        })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max && (self.dtype == Dtype::Real || v.fract() == 0.0)
    }

    /// Clamps into `[min, max]`; integer features are rounded half away from zero
    /// and clamped again.
    pub fn project(&self, v: f64) -> f64 {
        let clamped = v.clamp(self.min, self.max);
        match self.dtype {
            Dtype::Real => clamped,
            Dtype::Integer => clamped.round().clamp(self.min, self.max),
        }
    }
}

/// Projects every coordinate of `x` onto its feature domain.
pub fn project_domain(x: &[f64], domains: &[FeatureDomain]) -> Vec<f64> {
    x.iter().zip(domains).map(|(&v, d)| d.project(v)).collect()
}

/// True when every coordinate lies in its feature domain.
pub fn within_domain(x: &[f64], domains: &[FeatureDomain]) -> bool {
    x.len() == domains.len() && x.iter().zip(domains).all(|(&v, d)| d.contains(v))
}

/// Per-feature min/max from `rows`; a feature is integer iff all its values are whole,
/// unless `hints` says otherwise.
pub fn infer_domains(
    rows: &[Vec<f64>],
    names: &[String],
    hints: &BTreeMap<String, Dtype>,
) -> Result<Vec<FeatureDomain>> {
    if rows.is_empty() {
        return Err(Error::Empty("cannot infer domains from zero rows".into()));
    }
    let m = names.len();
    let mut domains = Vec::with_capacity(m);
    for (j, name) in names.iter().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut whole = true;
        for row in rows {
            let v = row[j];
            lo = lo.min(v);
            hi = hi.max(v);
            whole &= v.fract() == 0.0;
        }
        let dtype = match hints.get(name) {
            Some(&Dtype::Integer) => {
                if let Some(row) = rows.iter().position(|r| r[j].fract() != 0.0) {
                    return Err(Error::Domain {
                        row,
                        column: name.clone(),
                        message: format!("value {} is not a whole number", rows[row][j]),
                    });
                }
                Dtype::Integer
            }
            Some(&Dtype::Real) => Dtype::Real,
            None if whole => Dtype::Integer,
            None => Dtype::Real,
        };
        domains.push(FeatureDomain::new(name.clone(), dtype, lo, hi)?);
    }
    Ok(domains)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub domains: Vec<FeatureDomain>,
}

impl Dataset {
    /// Builds a dataset and infers its domains from the rows.
    pub fn from_rows(
        feature_names: Vec<String>,
        class_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        hints: &BTreeMap<String, Dtype>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Shape {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        for row in &rows {
            if row.len() != feature_names.len() {
                return Err(Error::Shape {
                    expected: feature_names.len(),
                    actual: row.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::InvalidClass {
                index: bad,
                classes: class_names.len(),
            });
        }
        let domains = infer_domains(&rows, &feature_names, hints)?;
        Ok(Self {
            feature_names,
            class_names,
            rows,
            labels,
            domains,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows and labels at `indices`; names, classes and domains are shared.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            domains: self.domains.clone(),
        }
    }

    /// Replaces domain bounds or types with manual overrides, checking every row.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, DomainOverride>) -> Result<()> {
        for (name, o) in overrides {
            let j = self
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            let d = &self.domains[j];
            let updated = FeatureDomain::new(
                name.clone(),
                o.dtype.unwrap_or(d.dtype),
                o.min.unwrap_or(d.min),
                o.max.unwrap_or(d.max),
            )?;
            if let Some(row) = self.rows.iter().position(|r| !updated.contains(r[j])) {
                return Err(Error::Domain {
                    row,
                    column: name.clone(),
                    message: format!("value {} outside the overridden domain", self.rows[row][j]),
                });
            }
            self.domains[j] = updated;
        }
        Ok(())
    }
}

/// Reads a comma-separated file with a header row. The label column may hold any
/// strings; classes are numbered in order of first appearance.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    hints: &BTreeMap<String, Dtype>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column, hints)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    label_column: &str,
    hints: &BTreeMap<String, Dtype>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Empty("csv has no header".into()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    for name in hints.keys() {
        if !headers.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut class_names: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if i == label_idx {
                if cell.is_empty() {
                    return Err(Error::Parse {
                        row: r,
                        column: headers[i].clone(),
                        message: "missing label".into(),
                    });
                }
                let next = class_names.len();
                let id = *class_ids.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                labels.push(id);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r,
                column: headers[i].clone(),
                message: if cell.is_empty() {
                    "missing value".into()
                } else {
                    format!("'{cell}' is not a number")
                },
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r,
                    column: headers[i].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv has no data rows".into()));
    }
    Dataset::from_rows(feature_names, class_names, rows, labels, hints)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainOverride {
    pub dtype: Option<Dtype>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Dataset manifest: where the CSV lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// CSV path, relative to the manifest file.
    pub csv: PathBuf,
    pub label: String,
    #[serde(default)]
    pub dtypes: BTreeMap<String, Dtype>,
    #[serde(default)]
    pub domains: BTreeMap<String, DomainOverride>,
    /// Network settings for this dataset; unset fields keep their defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainOverrides>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Optional per-dataset replacements for [`TrainConfig`] fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub hidden_sizes: Option<[usize; 2]>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub early_stopping_patience: Option<usize>,
    pub max_epochs: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            hidden_sizes: self.hidden_sizes.unwrap_or(base.hidden_sizes),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            early_stopping_patience: self
                .early_stopping_patience
                .unwrap_or(base.early_stopping_patience),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            rng_seed: base.rng_seed,
        }
    }
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = toml::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.base_dir.join(&self.csv)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let mut ds = load_csv(self.csv_path(), &self.label, &self.dtypes)?;
        ds.apply_overrides(&self.domains)?;
        Ok(ds)
    }
}

/// Row indices of a train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Seeded permutation of `0..n` cut by `ratios` (train, validation, test).
pub fn split(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if ratios.iter().any(|&r| r.is_nan() || r <= 0.0) {
        return Err(Error::Config("split ratios must be positive".into()));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
    }
    let n_train = (n as f64 * ratios[0]).round() as usize;
    let n_val = (n as f64 * ratios[1]).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_val == 0 {
        return Err(Error::EmptySplit("validation"));
    }
    if n_train + n_val >= n {
        return Err(Error::EmptySplit("test"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = perm.split_off(n_train + n_val);
    let val = perm.split_off(n_train);
    Ok(SplitIndices {
        train: perm,
        val,
        test,
    })
}

/// Per-feature min-max scaling record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty("cannot fit a normalizer on zero rows".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in &rows[1..] {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn num_features(&self) -> usize {
        self.min.len()
    }

    /// `max - min` per feature; zero for constant features.
    pub fn ranges(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| hi - lo)
            .collect()
    }

    /// Scales into `[0, 1]` for values seen at fit time; constant features map to 0.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { lo + v * (hi - lo) } else { lo })
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}
