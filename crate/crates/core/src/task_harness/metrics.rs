//! Accuracy, macro F1 and rank-statistic AUC.

use crate::error::{LeafError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// Absent when the label set has a single class.
    pub f1: Option<f64>,
    /// Absent when no class has both positive and negative examples.
    pub auc: Option<f64>,
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Mann-Whitney U over `n_pos * n_neg`, ties counted as one half.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average 1-based ranks over runs of equal scores.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Per-class F1 with `0` for classes that never occur nor get predicted.
pub fn per_class_f1(preds: &[usize], labels: &[usize], n_classes: usize) -> Vec<f64> {
    (0..n_classes)
        .map(|c| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fn_ = 0usize;
            for (p, l) in preds.iter().zip(labels) {
                match (*p == c, *l == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .collect()
}

/// Metrics from per-item class probabilities. Binary tasks use the
/// class-1 score for AUC; larger tasks average one-vs-rest AUCs.
pub fn evaluate_metrics(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Metrics> {
    if n_classes < 2 {
        return Err(LeafError::Spec("metrics need at least two classes".into()));
    }
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(LeafError::Spec(format!(
            "{} score rows for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| p.len() != n_classes) {
        return Err(LeafError::Spec(format!(
            "score row of length {} for {n_classes} classes",
            p.len()
        )));
    }
    if let Some(l) = labels.iter().find(|l| **l >= n_classes) {
        return Err(LeafError::Spec(format!("label {l} outside 0..{n_classes}")));
    }
    let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let accuracy = correct as f64 / labels.len() as f64;

    let distinct = {
        let mut seen = vec![false; n_classes];
        labels.iter().for_each(|l| seen[*l] = true);
        seen.iter().filter(|s| **s).count()
    };
    let f1 = (distinct >= 2).then(|| {
        let per = per_class_f1(&preds, labels, n_classes);
        per.iter().sum::<f64>() / n_classes as f64
    });

    let auc = if n_classes == 2 {
        let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let pos: Vec<bool> = labels.iter().map(|l| *l == 1).collect();
        binary_auc(&scores, &pos)
    } else {
        let aucs: Vec<f64> = (0..n_classes)
            .filter_map(|c| {
                let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
                let pos: Vec<bool> = labels.iter().map(|l| *l == c).collect();
                binary_auc(&scores, &pos)
            })
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    };
    Ok(Metrics { accuracy, f1, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn onehot(labels: &[usize], c: usize) -> Vec<Vec<f64>> {
        labels
            .iter()
            .map(|&l| (0..c).map(|k| if k == l { 0.9 } else { 0.1 / (c - 1) as f64 }).collect())
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 1, 0, 2];
        let m = evaluate_metrics(&onehot(&labels, 3), &labels, 3).unwrap();
        assert_eq!(m, Metrics { accuracy: 1.0, f1: Some(1.0), auc: Some(1.0) });
    }

    #[test]
    fn auc_hand_count() {
        assert_eq!(binary_auc(&[0.9, 0.8, 0.3], &[true, false, false]), Some(1.0));
        // One positive below one negative out of two pairs.
        assert_eq!(binary_auc(&[0.5, 0.8, 0.3], &[true, false, false]), Some(0.5));
        assert_eq!(binary_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
        assert_eq!(binary_auc(&[0.5, 0.4], &[true, true]), None);
    }

    #[test]
    fn constant_prediction_on_balanced_binary() {
        let labels = [0, 1, 0, 1, 0, 1];
        let probs = vec![vec![0.8, 0.2]; 6];
        let m = evaluate_metrics(&probs, &labels, 2).unwrap();
        assert_eq!(m.accuracy, 0.5);
        let per = per_class_f1(&[0; 6], &labels, 2);
        assert_eq!(per[1], 0.0);
        assert!((per[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_labels_leave_f1_and_auc_absent() {
        let m = evaluate_metrics(&[vec![0.3, 0.7], vec![0.6, 0.4]], &[1, 1], 2).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.f1, None);
        assert_eq!(m.auc, None);
    }

    #[test]
    fn random_scores_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scores: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let pos: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let auc = binary_auc(&scores, &pos).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "{auc}");
    }

    #[test]
    fn metrics_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let labels: Vec<usize> = (0..20).map(|_| rng.random_range(0..4)).collect();
            let probs: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
            let m = evaluate_metrics(&probs, &labels, 4).unwrap();
            for v in [Some(m.accuracy), m.f1, m.auc].into_iter().flatten() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
