//! Supervised multi-interval discretization with the minimum-description-length
//! stopping rule (Fayyad and Irani).
//!
//! A range of sorted values is split at the boundary with the largest class
//! information gain, and the split is kept only when the gain beats
//! `(log2(n - 1) + delta) / n`, where
//! `delta = log2(3^k - 2) - (k H(S) - k1 H(S1) - k2 H(S2))` and `k`, `k1`, `k2`
//! count the classes present in each part. Accepted halves are split recursively.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    /// Sorted cut points; each lies midway between two adjacent distinct values.
    pub cuts: Vec<f64>,
    /// Bin index of every input value, in input order.
    pub codes: Vec<u32>,
}

impl Discretization {
    pub fn num_bins(&self) -> usize {
        self.cuts.len() + 1
    }
}

/// Bin index of `v` given sorted cut points.
pub fn code_for(cuts: &[f64], v: f64) -> u32 {
    cuts.partition_point(|&c| c < v) as u32
}

pub(crate) fn entropy_of_counts(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn classes_present(counts: &[usize]) -> usize {
    counts.iter().filter(|&&c| c > 0).count()
}

/// The gain and MDL threshold of splitting a class-count vector into two parts.
pub fn mdl_split_test(total: &[usize], left: &[usize]) -> (f64, f64) {
    let right: Vec<usize> = total.iter().zip(left).map(|(t, l)| t - l).collect();
    let n: usize = total.iter().sum();
    let n_left: usize = left.iter().sum();
    let n_right = n - n_left;
    let h = entropy_of_counts(total, n);
    let h_left = entropy_of_counts(left, n_left);
    let h_right = entropy_of_counts(&right, n_right);
    let nf = n as f64;
    let gain = h - (n_left as f64 / nf) * h_left - (n_right as f64 / nf) * h_right;
    let k = classes_present(total) as f64;
    let k1 = classes_present(left) as f64;
    let k2 = classes_present(&right) as f64;
    let delta = (3f64.powf(k) - 2.0).log2() - (k * h - k1 * h_left - k2 * h_right);
    let threshold = ((nf - 1.0).log2() + delta) / nf;
    (gain, threshold)
}

/// Discretizes one column against class labels.
pub fn discretize(values: &[f64], labels: &[usize]) -> Result<Discretization> {
    if values.len() != labels.len() {
        return Err(Error::Shape {
            expected: values.len(),
            actual: labels.len(),
        });
    }
    if values.is_empty() {
        return Ok(Discretization {
            cuts: Vec::new(),
            codes: Vec::new(),
        });
    }
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<(f64, usize)> = order.iter().map(|&i| (values[i], labels[i])).collect();

    let mut cuts = Vec::new();
    split_range(&sorted, num_classes, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    let codes = values.iter().map(|&v| code_for(&cuts, v)).collect();
    Ok(Discretization { cuts, codes })
}

fn split_range(sorted: &[(f64, usize)], num_classes: usize, cuts: &mut Vec<f64>) {
    let n = sorted.len();
    if n < 2 {
        return;
    }
    let mut total = vec![0usize; num_classes];
    for &(_, y) in sorted {
        total[y] += 1;
    }
    if classes_present(&total) < 2 {
        return;
    }
    let h = entropy_of_counts(&total, n);

    let mut left = vec![0usize; num_classes];
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for i in 1..n {
        left[sorted[i - 1].1] += 1;
        if sorted[i - 1].0 == sorted[i].0 {
            continue;
        }
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let weighted = (i as f64 / n as f64) * entropy_of_counts(&left, i)
            + ((n - i) as f64 / n as f64) * entropy_of_counts(&right, n - i);
        let gain = h - weighted;
        if best.as_ref().is_none_or(|(_, g, _)| gain > *g) {
            best = Some((i, gain, left.clone()));
        }
    }
    let Some((at, _, left_counts)) = best else {
        return;
    };
    let (gain, threshold) = mdl_split_test(&total, &left_counts);
    if gain <= threshold {
        return;
    }
    cuts.push(0.5 * (sorted[at - 1].0 + sorted[at].0));
    split_range(&sorted[..at], num_classes, cuts);
    split_range(&sorted[at..], num_classes, cuts);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_two_class_split() {
        let d = discretize(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(d.cuts.len(), 1);
        assert!(d.cuts[0] > 0.2 && d.cuts[0] < 0.8);
        assert_eq!(d.codes, vec![0, 0, 1, 1]);
    }

    #[test]
    fn constant_column_is_one_bin() {
        let d = discretize(&[0.0; 6], &[0, 1, 0, 1, 1, 0]).unwrap();
        assert!(d.cuts.is_empty());
        assert!(d.codes.iter().all(|&c| c == 0));
    }

    #[test]
    fn single_class_is_one_bin() {
        let d = discretize(&[0.1, 0.5, 0.9], &[1, 1, 1]).unwrap();
        assert_eq!(d.num_bins(), 1);
    }

    #[test]
    fn codes_follow_value_order_in_input_order() {
        let d = discretize(&[0.9, 0.1, 0.8, 0.2], &[1, 0, 1, 0]).unwrap();
        assert_eq!(d.codes, vec![1, 0, 1, 0]);
    }
}
