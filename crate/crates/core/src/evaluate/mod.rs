//! Task inference from labels, per-task metric reports, and
//! cross-validation.

mod cv;
mod matrix;
mod metrics;
mod report;

pub use cv::{aggregate, cross_validate, CvReport, INNER_TRAIN_FRACTION};
pub use matrix::{label_check, label_check_rows, LabelMatrix, ScoreMatrix};
pub use metrics::{accuracy, argmax, auprc, auroc, f1, precision, recall, Confusion, DEFAULT_THRESHOLD};
pub use report::{
    evaluate, evaluate_rows, metric_names, MetricReport, BINARY_METRICS, MULTICLASS_METRICS, MULTILABEL_METRICS,
    REPORT_FORMAT_VERSION,
};
