//! Metrics checked against the published confusion counts and F1 scores.

use gwl_core::evalcv::{accuracy, precision_recall, ConfusionMatrix, MetricsReport};

/// Published confusion counts; rows are predicted, columns true class.
const PUBLISHED: [[f64; 7]; 7] = [
    [208.8, 4.0, 7.7, 6.5, 1.7, 5.0, 477.4],
    [11.9, 75.8, 3.7, 4.5, 7.1, 3.7, 204.9],
    [22.9, 3.5, 41.9, 14.6, 3.6, 1.5, 138.6],
    [10.4, 2.8, 10.4, 61.5, 6.3, 11.7, 85.9],
    [3.2, 11.6, 3.6, 15.0, 25.2, 5.5, 78.4],
    [9.1, 3.8, 2.4, 20.5, 5.5, 44.7, 185.7],
    [43.3, 7.0, 6.6, 5.2, 2.7, 5.3, 1729.9],
];
const PRECISION: [f64; 7] = [0.29, 0.24, 0.18, 0.33, 0.18, 0.16, 0.96];
const RECALL: [f64; 7] = [0.67, 0.70, 0.55, 0.48, 0.48, 0.58, 0.60];
const ROW_SUMS: [f64; 7] = [711.2, 311.5, 226.6, 188.9, 142.5, 271.7, 1800.0];
const COL_SUMS: [f64; 7] = [309.6, 108.6, 76.2, 127.7, 52.1, 77.4, 2900.7];

#[test]
fn published_precision_recall_and_accuracy() {
    let cm = ConfusionMatrix::from_counts(PUBLISHED).unwrap();
    let (p, r, warnings) = precision_recall(&cm);
    assert!(warnings.is_empty());
    for k in 0..7 {
        assert!(
            (p[k] - PRECISION[k]).abs() <= 0.005,
            "precision {k}: {}",
            p[k]
        );
        assert!((r[k] - RECALL[k]).abs() <= 0.005, "recall {k}: {}", r[k]);
        assert!((cm.row_sums()[k] - ROW_SUMS[k]).abs() < 0.15);
        assert!((cm.col_sums()[k] - COL_SUMS[k]).abs() < 0.15);
    }
    assert!((accuracy(&cm) - 0.599).abs() <= 0.005);
    assert!((cm.total() - 3652.4).abs() < 0.2);
    // Hand arithmetic on single cells.
    assert!((208.8f64 / 309.6 - r[0]).abs() < 1e-12);
    assert!((1729.9f64 / 1800.0 - 0.9611).abs() < 1e-4);
}

#[test]
fn published_macro_f1() {
    let final_f1 = [0.41, 0.36, 0.28, 0.39, 0.26, 0.26, 0.74];
    let mean = final_f1.iter().sum::<f64>() / 7.0;
    assert!((mean - 0.3857).abs() < 1e-4);
    assert!((mean - 0.384).abs() <= 0.01);
    // The F1 of the published counts lands on the same figure.
    let report = MetricsReport::from_confusion(ConfusionMatrix::from_counts(PUBLISHED).unwrap());
    assert!(
        (report.macro_f1 - 0.384).abs() <= 0.01,
        "{}",
        report.macro_f1
    );
    for (k, f) in report.f1.iter().enumerate() {
        assert!((f - final_f1[k]).abs() <= 0.011, "class {k}: {f}");
    }
}
