use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::matrix::{label_check, LabelMatrix, ScoreMatrix};
use super::metrics::{argmax, auprc, auroc, Confusion, DEFAULT_THRESHOLD};
use crate::common::TaskKind;
use crate::error::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub const BINARY_METRICS: [&str; 6] = ["accuracy", "precision", "recall", "f1", "auroc", "auprc"];
pub const MULTICLASS_METRICS: [&str; 3] = ["accuracy", "macro_f1", "macro_auroc"];
pub const MULTILABEL_METRICS: [&str; 4] = ["micro_f1", "macro_f1", "macro_auroc", "macro_auprc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: TaskKind,
    pub n: usize,
    pub metrics: IndexMap<String, f64>,
    /// Label columns left out of macro averages because they hold a single class.
    pub skipped_columns: usize,
    pub format_version: u32,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One `name=value` line per metric, six decimals.
    pub fn summary_lines(&self) -> Vec<String> {
        self.metrics.iter().map(|(k, v)| format!("{k}={v:.6}")).collect()
    }
}

pub fn metric_names(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::BinaryClassification => &BINARY_METRICS,
        TaskKind::MultiClass => &MULTICLASS_METRICS,
        TaskKind::MultiLabel => &MULTILABEL_METRICS,
    }
}

fn is_degenerate(column: &[u8]) -> bool {
    column.iter().all(|&v| v == column[0])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Evaluates scores against labels, inferring the task from the labels.
///
/// Binary reports need both classes present. For multiclass and multilabel,
/// single-class columns are skipped in macro averages and counted; if every
/// column is single-class the labels are rejected.
pub fn evaluate(hat_y: &ScoreMatrix, y: &LabelMatrix) -> Result<MetricReport> {
    if hat_y.rows() != y.rows() || hat_y.cols() != y.cols() {
        return Err(Error::Shape(format!(
            "hat_y is {}x{} but y is {}x{}",
            hat_y.rows(),
            hat_y.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let task = label_check(y);
    let d = y.cols();
    let live: Vec<usize> = (0..d).filter(|&j| !is_degenerate(&y.column(j))).collect();
    if live.is_empty() {
        return Err(Error::DegenerateLabels(format!(
            "all {d} label columns hold a single class"
        )));
    }
    let mut metrics = IndexMap::new();
    match task {
        TaskKind::BinaryClassification => {
            let (s, t) = (hat_y.column(0), y.column(0));
            let c = Confusion::from_scores(&s, &t, DEFAULT_THRESHOLD)?;
            metrics.insert("accuracy".into(), c.accuracy());
            metrics.insert("precision".into(), c.precision());
            metrics.insert("recall".into(), c.recall());
            metrics.insert("f1".into(), c.f1());
            metrics.insert("auroc".into(), auroc(&s, &t)?);
            metrics.insert("auprc".into(), auprc(&s, &t)?);
        }
        TaskKind::MultiClass => {
            let predicted: Vec<usize> = (0..y.rows()).map(|i| argmax(hat_y.row(i))).collect();
            let actual: Vec<usize> = (0..y.rows())
                .map(|i| y.row(i).iter().position(|&v| v == 1).unwrap())
                .collect();
            let correct = predicted.iter().zip(&actual).filter(|(p, a)| p == a).count();
            metrics.insert("accuracy".into(), correct as f64 / y.rows() as f64);
            let mut f1s = Vec::new();
            for c in 0..d {
                if !live.contains(&c) {
                    continue;
                }
                let mut conf = Confusion::default();
                for (&p, &a) in predicted.iter().zip(&actual) {
                    conf.add(p == c, a == c);
                }
                f1s.push(conf.f1());
            }
            metrics.insert("macro_f1".into(), mean(&f1s));
            let aurocs = live
                .iter()
                .map(|&j| auroc(&hat_y.column(j), &y.column(j)))
                .collect::<Result<Vec<_>>>()?;
            metrics.insert("macro_auroc".into(), mean(&aurocs));
        }
        TaskKind::MultiLabel => {
            let mut micro = Confusion::default();
            for i in 0..y.rows() {
                for j in 0..d {
                    micro.add(hat_y.get(i, j) >= DEFAULT_THRESHOLD, y.get(i, j) == 1);
                }
            }
            metrics.insert("micro_f1".into(), micro.f1());
            let mut f1s = Vec::new();
            let mut aurocs = Vec::new();
            let mut auprcs = Vec::new();
            for &j in &live {
                let (s, t) = (hat_y.column(j), y.column(j));
                f1s.push(Confusion::from_scores(&s, &t, DEFAULT_THRESHOLD)?.f1());
                aurocs.push(auroc(&s, &t)?);
                auprcs.push(auprc(&s, &t)?);
            }
            metrics.insert("macro_f1".into(), mean(&f1s));
            metrics.insert("macro_auroc".into(), mean(&aurocs));
            metrics.insert("macro_auprc".into(), mean(&auprcs));
        }
    }
    Ok(MetricReport {
        task,
        n: y.rows(),
        metrics,
        skipped_columns: d - live.len(),
        format_version: REPORT_FORMAT_VERSION,
    })
}

/// [`evaluate`] over plain rows.
pub fn evaluate_rows(hat_y: &[Vec<f64>], y: &[Vec<f64>]) -> Result<MetricReport> {
    evaluate(&ScoreMatrix::from_rows(hat_y)?, &LabelMatrix::from_f64_rows(y)?)
}
