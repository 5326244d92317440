//! Delimiter-separated renderings of metrics: the confusion table, the
//! ablation table and one-record-per-metric output.

use std::fmt::Write as _;

use super::metrics::{ConfusionMatrix, MetricsReport};
use super::nested::CvOutcome;
use crate::datamodel::{ClassId, N_CLASSES};
use crate::error::{Error, Result};

fn header(first: &str, tail: &[&str]) -> String {
    let mut line = first.to_string();
    for c in ClassId::ALL {
        line.push(',');
        line.push_str(c.table_label());
    }
    for t in tail {
        line.push(',');
        line.push_str(t);
    }
    line.push('\n');
    line
}

/// Confusion matrix with row sums and precision, column sums and recall.
/// Rows are predicted classes, columns true labels.
pub fn confusion_table(report: &MetricsReport) -> String {
    let cm = &report.confusion;
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let mut out = header("output", &["Sum", "Precision"]);
    for c in ClassId::ALL {
        let k = c.index();
        let _ = write!(out, "{}", c.table_label());
        for v in cm.counts[k] {
            let _ = write!(out, ",{v:.1}");
        }
        let _ = writeln!(out, ",{:.1},{:.4}", rows[k], report.precision[k]);
    }
    out.push_str("Sum");
    for v in cols {
        let _ = write!(out, ",{v:.1}");
    }
    let _ = writeln!(out, ",{:.1},", cm.total());
    out.push_str("Recall");
    for v in report.recall {
        let _ = write!(out, ",{v:.4}");
    }
    out.push_str(",,\n");
    out
}

/// One row per ablation variant: class F1s, accuracy, macro F1.
pub fn ablation_table(outcomes: &[CvOutcome]) -> String {
    let rows: Vec<(&str, &MetricsReport)> = outcomes
        .iter()
        .map(|o| (o.ablation.name(), &o.report))
        .collect();
    comparison_table(&rows)
}

/// [`ablation_table`] for arbitrary named reports.
pub fn comparison_table(rows: &[(&str, &MetricsReport)]) -> String {
    let mut out = header("model", &["Accuracy", "F1-score"]);
    for (name, r) in rows {
        out.push_str(name);
        for v in r.f1 {
            let _ = write!(out, ",{v:.4}");
        }
        let _ = writeln!(out, ",{:.4},{:.4}", r.accuracy, r.macro_f1);
    }
    out
}

fn push_report(out: &mut String, variant: &str, fold: &str, r: &MetricsReport) {
    let mut rec = |metric: &str, class: &str, value: f64| {
        let _ = writeln!(out, "{variant},{metric},{class},{fold},{value}");
    };
    for c in ClassId::ALL {
        let k = c.index();
        rec("precision", c.code(), r.precision[k]);
        rec("recall", c.code(), r.recall[k]);
        rec("f1", c.code(), r.f1[k]);
    }
    rec("accuracy", "all", r.accuracy);
    rec("macro_f1", "all", r.macro_f1);
    for p in 0..N_CLASSES {
        for t in 0..N_CLASSES {
            let name = format!("count_pred_{}", ClassId::ALL[p].code());
            rec(&name, ClassId::ALL[t].code(), r.confusion.counts[p][t]);
        }
    }
}

/// `variant,metric,class,fold,value` records; fold `mean` holds the metrics
/// of the fold-averaged confusion matrix.
pub fn metric_records(outcomes: &[CvOutcome]) -> String {
    let mut out = String::from("variant,metric,class,fold,value\n");
    for o in outcomes {
        let variant = o.ablation.name();
        push_report(&mut out, variant, "mean", &o.report);
        for (fold, r) in &o.fold_reports {
            push_report(&mut out, variant, &fold.to_string(), r);
        }
    }
    out
}

/// Rebuild the fold-averaged report of every variant from
/// [`metric_records`] output, in order of first appearance. Metrics are
/// recomputed from the stored confusion counts. `#` lines are skipped.
pub fn parse_metric_records(text: &str) -> Result<Vec<(String, MetricsReport)>> {
    let mut variants: Vec<(String, ConfusionMatrix)> = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "variant,metric,class,fold,value" {
                return Err(Error::parse(
                    n,
                    "expected header variant,metric,class,fold,value",
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [variant, metric, class, fold, value] = fields[..] else {
            return Err(Error::parse(
                n,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        };
        if fold != "mean" {
            continue;
        }
        let Some(pred) = metric.strip_prefix("count_pred_") else {
            continue;
        };
        let p: ClassId = pred
            .parse()
            .map_err(|_| Error::parse(n, format!("unknown class {pred:?}")))?;
        let t: ClassId = class
            .parse()
            .map_err(|_| Error::parse(n, format!("unknown class {class:?}")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::parse(n, format!("bad value {value:?}")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::parse(
                n,
                format!("count {v} must be finite and >= 0"),
            ));
        }
        let idx = match variants.iter().position(|(name, _)| name == variant) {
            Some(i) => i,
            None => {
                variants.push((variant.to_string(), ConfusionMatrix::default()));
                variants.len() - 1
            }
        };
        variants[idx].1.counts[p.index()][t.index()] = v;
    }
    if variants.is_empty() {
        return Err(Error::parse(1, "no fold-averaged confusion counts found"));
    }
    Ok(variants
        .into_iter()
        .map(|(name, cm)| (name, MetricsReport::from_confusion(cm)))
        .collect())
}

/// Per-fold training and tuning details.
pub fn fold_summary(outcome: &CvOutcome) -> String {
    let mut out = String::from(
        "fold,test_years,learning_rate,dropout_rate,best_epoch,epochs,trials,test_days,smoothing_changes,unconverged_segments\n",
    );
    for r in &outcome.runs {
        let years: Vec<String> = r.test_years.iter().map(i32::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.fold,
            years.join(" "),
            r.learning_rate,
            r.dropout_rate,
            r.best_epoch,
            r.history.len(),
            r.trials.len(),
            r.provenance.test.len(),
            r.smoothing_changes,
            r.unconverged_segments
        );
    }
    for f in &outcome.failures {
        let _ = writeln!(out, "# fold {} failed: {}", f.fold, f.message);
    }
    out
}
