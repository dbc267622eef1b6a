//! Empirical entropy, information gain and Symmetrical Uncertainty over discrete
//! columns, plus the forward redundancy filter built on them.

use std::sync::OnceLock;

use crate::discretize::{discretize, entropy_of_counts};
use crate::error::{Error, Result};

fn bin_counts(codes: &[u32]) -> Vec<usize> {
    let bins = codes.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut counts = vec![0usize; bins];
    for &c in codes {
        counts[c as usize] += 1;
    }
    counts
}

fn check_pair(a: &[u32], b: &[u32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("column".into()));
    }
    Ok(())
}

/// Entropy in bits of the empirical distribution of `codes`.
pub fn entropy(codes: &[u32]) -> Result<f64> {
    if codes.is_empty() {
        return Err(Error::Empty("column".into()));
    }
    Ok(entropy_of_counts(&bin_counts(codes), codes.len()))
}

/// `H(a | b)`: the entropy of `a` within each value of `b`, weighted by that value's frequency.
fn conditional_entropy(a: &[u32], b: &[u32]) -> f64 {
    let a_bins = a.iter().copied().max().map_or(0, |m| m as usize + 1);
    let b_bins = b.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut joint = vec![0usize; a_bins * b_bins];
    let mut b_counts = vec![0usize; b_bins];
    for (&x, &y) in a.iter().zip(b) {
        joint[y as usize * a_bins + x as usize] += 1;
        b_counts[y as usize] += 1;
    }
    let n = a.len() as f64;
    b_counts
        .iter()
        .enumerate()
        .filter(|&(_, &nb)| nb > 0)
        .map(|(y, &nb)| {
            (nb as f64 / n) * entropy_of_counts(&joint[y * a_bins..(y + 1) * a_bins], nb)
        })
        .sum()
}

/// `IG(a | b) = H(a) - H(a | b)`, clamped at zero against rounding.
pub fn info_gain(a: &[u32], b: &[u32]) -> Result<f64> {
    check_pair(a, b)?;
    let h = entropy_of_counts(&bin_counts(a), a.len());
    Ok((h - conditional_entropy(a, b)).max(0.0))
}

/// `2 IG(a | b) / (H(a) + H(b))`, or 0 when both columns are constant.
pub fn symmetrical_uncertainty(a: &[u32], b: &[u32]) -> Result<f64> {
    check_pair(a, b)?;
    let ha = entropy_of_counts(&bin_counts(a), a.len());
    let hb = entropy_of_counts(&bin_counts(b), b.len());
    let denom = ha + hb;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    // IG is symmetric in theory; summing both directions makes it so in floating
    // point too, which keeps memoized values independent of evaluation order.
    let ig_ab = (ha - conditional_entropy(a, b)).max(0.0);
    let ig_ba = (hb - conditional_entropy(b, a)).max(0.0);
    Ok(((ig_ab + ig_ba) / denom).clamp(0.0, 1.0))
}

/// Lazily evaluated, memoized SU between every pair of discretized feature columns.
#[derive(Debug)]
pub struct SuMatrix {
    columns: Vec<Vec<u32>>,
    cells: Vec<OnceLock<f64>>,
}

impl SuMatrix {
    /// `columns[j]` holds the codes of feature `j`; all columns must have equal length.
    pub fn new(columns: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(first) = columns.first() {
            if first.is_empty() {
                return Err(Error::Empty("SU matrix columns".into()));
            }
            if let Some(bad) = columns.iter().find(|c| c.len() != first.len()) {
                return Err(Error::Shape {
                    expected: first.len(),
                    actual: bad.len(),
                });
            }
        }
        let m = columns.len();
        let cells = (0..m * (m + 1) / 2).map(|_| OnceLock::new()).collect();
        Ok(Self { columns, cells })
    }

    /// Discretizes each (already normalized) feature column against `labels`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let columns = (0..m)
            .map(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                discretize(&col, labels).map(|d| d.codes)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(columns)
    }

    pub fn num_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        hi * (hi + 1) / 2 + lo
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let m = self.num_features();
        for idx in [i, j] {
            if idx >= m {
                return Err(Error::InvalidFeature {
                    index: idx,
                    features: m,
                });
            }
        }
        let cell = &self.cells[self.slot(i, j)];
        if let Some(&v) = cell.get() {
            return Ok(v);
        }
        let v = symmetrical_uncertainty(&self.columns[i], &self.columns[j])?;
        Ok(*cell.get_or_init(|| v))
    }

    /// Dense CSV dump with a header of feature names.
    pub fn to_csv(&self, names: &[String]) -> Result<String> {
        if names.len() != self.num_features() {
            return Err(Error::Shape {
                expected: self.num_features(),
                actual: names.len(),
            });
        }
        let mut out = String::from("feature");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, name) in names.iter().enumerate() {
            out.push_str(name);
            for j in 0..self.num_features() {
                out.push_str(&format!(",{:.6}", self.get(i, j)?));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Keeps features of `ranked` in order, dropping any whose SU with an already kept
/// feature exceeds `gamma`.
pub fn entropy_filter(ranked: &[usize], gamma: f64, su: &SuMatrix) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma {gamma} is outside [0, 1]")));
    }
    let mut kept: Vec<usize> = Vec::with_capacity(ranked.len());
    for &i in ranked {
        if i >= su.num_features() {
            return Err(Error::InvalidFeature {
                index: i,
                features: su.num_features(),
            });
        }
        if kept.contains(&i) {
            return Err(Error::Contract(format!("feature {i} listed twice")));
        }
        let mut admit = true;
        for &j in &kept {
            if su.get(i, j)? > gamma {
                admit = false;
                break;
            }
        }
        if admit {
            kept.push(i);
        }
    }
    Ok(kept)
}
