//! Binary classification metrics and verdict flip rates.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::pair::Decision;

/// How undecidable pairs enter the confusion matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndecidablePolicy {
    /// Count as a non-clone prediction.
    #[default]
    AsNegative,
    /// Leave out of the matrix entirely.
    Exclude,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn round_count(x: f64) -> u64 {
    libm::round(x).max(0.0) as u64
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn metrics(&self) -> Metrics {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            accuracy: ratio(self.tp + self.tn, self.total()),
            tpr: recall,
            tnr: ratio(self.tn, self.tn + self.fp),
        }
    }

    /// Rebuilds the integer matrix behind rounded, reported rates on a population
    /// of `total` pairs with `positives` true clones.
    ///
    /// `tp` comes from recall, `tn` from the true-negative rate; precision
    /// is redundant given those and is only used by callers as a check.
    pub fn reconstruct(rates: &ReportedRates, total: u64, positives: u64) -> Self {
        let negatives = total.saturating_sub(positives);
        let tp = round_count(rates.recall * positives as f64).min(positives);
        let tn = round_count(rates.tnr * negatives as f64).min(negatives);
        Self {
            tp,
            fp: negatives - tn,
            fn_: positives - tp,
            tn,
        }
    }
}

/// Rates as a results table reports them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedRates {
    pub precision: f64,
    pub recall: f64,
    pub tnr: f64,
}

impl From<Metrics> for ReportedRates {
    fn from(m: Metrics) -> Self {
        Self {
            precision: m.precision,
            recall: m.recall,
            tnr: m.tnr,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tpr: f64,
    pub tnr: f64,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "precision={:.4} recall={:.4} f1={:.4} accuracy={:.4} tpr={:.4} tnr={:.4}",
            self.precision, self.recall, self.f1, self.accuracy, self.tpr, self.tnr
        )
    }
}

/// Builds the confusion matrix of `decisions` against ground-truth `labels`.
pub fn compute_metrics(
    decisions: &[Decision],
    labels: &[Option<bool>],
    policy: UndecidablePolicy,
) -> Result<(ConfusionMatrix, Metrics), CoreError> {
    if decisions.len() != labels.len() {
        return Err(CoreError::LengthMismatch {
            expected: decisions.len(),
            actual: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (decision, label)) in decisions.iter().zip(labels).enumerate() {
        let actual = label.ok_or(CoreError::MissingLabels(i))?;
        let predicted = match decision {
            Decision::Clone => true,
            Decision::NonClone => false,
            Decision::Undecidable => match policy {
                UndecidablePolicy::AsNegative => false,
                UndecidablePolicy::Exclude => continue,
            },
        };
        cm.record(predicted, actual);
    }
    Ok((cm, cm.metrics()))
}

/// Percentage of positions where the two verdict lists disagree.
pub fn flip_rate<T: PartialEq>(baseline: &[T], reeval: &[T]) -> Result<f64, CoreError> {
    if baseline.len() != reeval.len() {
        return Err(CoreError::LengthMismatch {
            expected: baseline.len(),
            actual: reeval.len(),
        });
    }
    if baseline.is_empty() {
        return Ok(0.0);
    }
    let flipped = baseline.iter().zip(reeval).filter(|(a, b)| a != b).count();
    Ok(100.0 * flipped as f64 / baseline.len() as f64)
}
