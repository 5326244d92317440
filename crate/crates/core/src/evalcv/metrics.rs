//! Confusion matrices and the derived classification metrics.

use crate::datamodel::{ClassId, LabelSeries, N_CLASSES};
use crate::error::{Error, Result};
use crate::smoothing::PredSeries;

/// `counts[p][t]`: days predicted `p` whose true label is `t`. Entries may be
/// fractional after averaging over folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMatrix {
    pub counts: [[f64; N_CLASSES]; N_CLASSES],
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self {
            counts: [[0.0; N_CLASSES]; N_CLASSES],
        }
    }
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[f64; N_CLASSES]; N_CLASSES]) -> Result<Self> {
        if counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("confusion counts must be finite and >= 0"));
        }
        Ok(Self { counts })
    }

    pub fn record(&mut self, predicted: ClassId, truth: ClassId) {
        self.counts[predicted.index()][truth.index()] += 1.0;
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self
            .counts
            .iter_mut()
            .flatten()
            .zip(other.counts.iter().flatten())
        {
            *a += b;
        }
    }

    /// Elementwise mean of `matrices`.
    pub fn mean(matrices: &[ConfusionMatrix]) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::invalid("no confusion matrices to average"));
        }
        let mut out = ConfusionMatrix::default();
        for m in matrices {
            out.add(m);
        }
        for c in out.counts.iter_mut().flatten() {
            *c /= matrices.len() as f64;
        }
        Ok(out)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> f64 {
        (0..N_CLASSES).map(|k| self.counts[k][k]).sum()
    }

    /// Predicted-class totals.
    pub fn row_sums(&self) -> [f64; N_CLASSES] {
        self.counts.map(|r| r.iter().sum())
    }

    /// True-class totals.
    pub fn col_sums(&self) -> [f64; N_CLASSES] {
        let mut s = [0.0; N_CLASSES];
        for row in &self.counts {
            for (t, c) in row.iter().enumerate() {
                s[t] += c;
            }
        }
        s
    }
}

pub fn confusion(pred: &PredSeries, truth: &LabelSeries) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.start_date != truth.start_date && !pred.is_empty() {
        return Err(Error::invalid(format!(
            "predictions start {} but labels start {}",
            pred.start_date, truth.start_date
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pred.labels.iter().zip(&truth.labels) {
        cm.record(*p, *t);
    }
    Ok(cm)
}

/// A metric that was 0/0 and has been reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndefinedMetric {
    Precision(ClassId),
    Recall(ClassId),
}

impl std::fmt::Display for UndefinedMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UndefinedMetric::Precision(c) => {
                write!(f, "precision of {c} is 0/0 (no predictions); reported as 0")
            }
            UndefinedMetric::Recall(c) => {
                write!(f, "recall of {c} is 0/0 (no true days); reported as 0")
            }
        }
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Per-class precision (over predicted rows) and recall (over true columns).
pub fn precision_recall(
    cm: &ConfusionMatrix,
) -> ([f64; N_CLASSES], [f64; N_CLASSES], Vec<UndefinedMetric>) {
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let mut warnings = Vec::new();
    let mut precision = [0.0; N_CLASSES];
    let mut recall = [0.0; N_CLASSES];
    for c in ClassId::ALL {
        let k = c.index();
        match ratio(cm.counts[k][k], rows[k]) {
            Some(v) => precision[k] = v,
            None => warnings.push(UndefinedMetric::Precision(c)),
        }
        match ratio(cm.counts[k][k], cols[k]) {
            Some(v) => recall[k] = v,
            None => warnings.push(UndefinedMetric::Recall(c)),
        }
    }
    (precision, recall, warnings)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn f1_scores(cm: &ConfusionMatrix) -> [f64; N_CLASSES] {
    let (p, r, _) = precision_recall(cm);
    std::array::from_fn(|k| f1(p[k], r[k]))
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    mean(&f1_scores(cm))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Trace over total; 0 for an empty matrix.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.trace(), cm.total()).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub precision: [f64; N_CLASSES],
    pub recall: [f64; N_CLASSES],
    pub f1: [f64; N_CLASSES],
    pub accuracy: f64,
    pub macro_f1: f64,
    pub warnings: Vec<UndefinedMetric>,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Self {
        let (precision, recall, warnings) = precision_recall(&cm);
        let f1 = std::array::from_fn(|k| f1(precision[k], recall[k]));
        Self {
            confusion: cm,
            precision,
            recall,
            f1,
            accuracy: accuracy(&cm),
            macro_f1: mean(&f1),
            warnings,
        }
    }
}
