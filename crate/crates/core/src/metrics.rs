//! Recovery and classification metrics.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};

/// Sorts `values` and drops `⌊fraction · len⌋` entries from each end.
pub fn trimmed_trials(values: &[f64], fraction: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return invalid("no trials to trim");
    }
    if !(0.0..0.5).contains(&fraction) {
        return invalid(format!("trim fraction must be in [0, 0.5), got {fraction}"));
    }
    let cut = (fraction * values.len() as f64).floor() as usize;
    if 2 * cut >= values.len() {
        return invalid(format!("trimming {cut} per side leaves nothing of {}", values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[cut..sorted.len() - cut].to_vec())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Fraction of errors at or below `threshold`.
pub fn probability_of_recovery(errors: &[f64], threshold: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().filter(|&&e| e <= threshold).count() as f64 / errors.len() as f64
}

fn class_counts(labels: &[f64]) -> Result<(usize, usize)> {
    let mut pos = 0;
    let mut neg = 0;
    for (i, &y) in labels.iter().enumerate() {
        if y == 1.0 {
            pos += 1;
        } else if y == -1.0 {
            neg += 1;
        } else {
            return invalid(format!("label {y} at position {i} is not ±1"));
        }
    }
    if pos == 0 || neg == 0 {
        return invalid("both classes must be present");
    }
    Ok((pos, neg))
}

/// Area under the ROC curve in Mann–Whitney form; tied scores count 1/2.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return invalid(format!("{} scores for {} labels", scores.len(), labels.len()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks, 1-based.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1.0 {
                pos_rank_sum += rank;
            }
        }
        i = j + 1;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Mean of the false-negative and false-positive rates.
pub fn balanced_error(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        ));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut false_neg = 0;
    let mut false_pos = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if p != 1.0 && p != -1.0 {
            return invalid(format!("prediction {p} is not ±1"));
        }
        if y == 1.0 && p == -1.0 {
            false_neg += 1;
        } else if y == -1.0 && p == 1.0 {
            false_pos += 1;
        }
    }
    Ok(0.5 * (false_neg as f64 / pos as f64 + false_pos as f64 / neg as f64))
}

/// Shuffles `0..m` and deals it into `k` folds whose sizes differ by at most
/// one (the first `m % k` folds get the extra element).
pub fn kfold_split<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > m {
        return invalid(format!("cannot split {m} items into {k} folds"));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let base = m / k;
    let extra = m % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}
