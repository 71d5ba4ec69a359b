//! Confusion-matrix metrics and pipeline rates.
//!
//! Ratios with a zero denominator are `None`. Callers that average over
//! operators decide explicitly how to treat them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("length mismatch: {predicted} predictions for {truth} labels")]
pub struct LengthMismatch {
    pub predicted: usize,
    pub truth: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn record(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Positive class is "valid".
pub fn confusion(predicted: &[bool], truth: &[bool]) -> Result<ConfusionMatrix, LengthMismatch> {
    if predicted.len() != truth.len() {
        return Err(LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        cm.record(p, t);
    }
    Ok(cm)
}

pub fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub positives_in_eval: u64,
}

pub fn precision_recall(cm: ConfusionMatrix) -> EvalReport {
    EvalReport {
        confusion: cm,
        precision: ratio(cm.tp, cm.tp + cm.fp),
        recall: ratio(cm.tp, cm.tp + cm.fn_),
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        f1: ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
        positives_in_eval: cm.positives(),
    }
}

pub fn evaluate(predicted: &[bool], truth: &[bool]) -> Result<EvalReport, LengthMismatch> {
    confusion(predicted, truth).map(precision_recall)
}

/// Fraction of executed inputs that passed validation.
pub fn pass_rate(valid_executed: u64, total_executed: u64) -> Option<f64> {
    debug_assert!(valid_executed <= total_executed);
    ratio(valid_executed, total_executed)
}

/// Throughput in valid inputs per second.
pub fn valid_per_second(valid: u64, seconds: f64) -> Option<f64> {
    (seconds > 0.0).then(|| valid as f64 / seconds)
}

/// Mean over the defined entries, with how many were skipped.
pub fn mean_defined(values: &[Option<f64>]) -> (Option<f64>, usize) {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let skipped = values.len() - defined.len();
    if defined.is_empty() {
        return (None, skipped);
    }
    (Some(defined.iter().sum::<f64>() / defined.len() as f64), skipped)
}

/// Percentage with one decimal, or `n/a`.
pub fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}%", 100.0 * x))
}
