use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Positive class is 1.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Data(format!(
            "confusion: length mismatch ({} vs {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => return Err(Error::Data("confusion: labels must be binary".into())),
        }
    }
    Ok(cm)
}

/// Harmonic mean of precision and recall.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Filled by the caller from the score-based ROC when available.
    pub auc: Option<f64>,
    /// Metrics whose denominator was zero, reported as 0 with a flag.
    pub degenerate: Vec<String>,
}

/// Confusion-count metric block. Zero denominators yield metric = 0 with
/// the metric named in `degenerate`.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsEntry> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("metrics: empty confusion matrix".into()));
    }
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: usize, den: usize| -> f64 {
        if den == 0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = ratio("precision", cm.tp, cm.tp + cm.fp);
    let recall = ratio("recall", cm.tp, cm.tp + cm.fn_);
    let specificity = ratio("specificity", cm.tn, cm.tn + cm.fp);
    let f1 = f1_from_pr(precision, recall);
    Ok(MetricsEntry { accuracy, precision, recall, specificity, f1, auc: None, degenerate })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocCurve {
    pub auc: f64,
    pub points: Vec<RocPoint>,
}

/// Tie-aware AUC (pairwise concordance with ties counting one half) with
/// the ROC polyline emitted at every distinct threshold. The trapezoidal
/// area under those points equals the concordance value.
pub fn roc_auc(scores: &[f64], y_true: &[u8]) -> Result<RocCurve> {
    if scores.len() != y_true.len() {
        return Err(Error::Data("roc_auc: length mismatch".into()));
    }
    let n_pos = y_true.iter().filter(|&&l| l == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data("roc_auc: both classes must be present".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc_steps = 0.0; // trapezoid accumulation over tie groups
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut group_tp = 0usize;
        let mut group_fp = 0usize;
        while i < order.len() && scores[order[i]] == threshold {
            if y_true[order[i]] == 1 {
                group_tp += 1;
            } else {
                group_fp += 1;
            }
            i += 1;
        }
        // trapezoid over the tie group: concordant pairs + half-credit ties
        auc_steps += group_fp as f64 * (tp as f64 + group_tp as f64 / 2.0);
        tp += group_tp;
        fp += group_fp;
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = auc_steps / (n_pos as f64 * n_neg as f64);
    Ok(RocCurve { auc, points })
}
