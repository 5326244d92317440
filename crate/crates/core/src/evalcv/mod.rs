//! Year-grouped nested cross-validation, classification metrics and the
//! smoothing ablation.

mod folds;
mod metrics;
mod nested;
mod report;

pub use folds::{plan_folds, years_of, FoldPlan, FoldRoles};
pub use metrics::{
    accuracy, confusion, f1, f1_scores, macro_f1, mean, precision_recall, ConfusionMatrix,
    MetricsReport, UndefinedMetric,
};
pub use nested::{
    ablation, nested_cv, AblationConfig, CvConfig, CvOutcome, FoldFailure, FoldProvenance, FoldRun,
};
pub use report::{
    ablation_table, comparison_table, confusion_table, fold_summary, metric_records,
    parse_metric_records,
};
