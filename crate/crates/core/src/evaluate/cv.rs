use indexmap::IndexMap;

use super::report::MetricReport;
use crate::common::ValidationError;
use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::preprocess::{kfold_indices, LabeledExample};

/// Fraction of each training fold kept for fitting; the rest picks the checkpoint.
pub const INNER_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<MetricReport>,
    /// Metrics present in every fold, in first-fold order.
    pub mean: IndexMap<String, f64>,
    /// Population standard deviation across folds.
    pub std: IndexMap<String, f64>,
}

/// k-fold cross-validation. `factory(fold)` must return a fresh predictor
/// (with its own checkpoint directory); each fold trains on 90% of its
/// training part, selects a checkpoint on the other 10%, and is scored on
/// its test fold. Errors carry the fold index.
pub fn cross_validate<F>(examples: &[LabeledExample], mut factory: F, k: usize, seed: u64) -> Result<CvReport>
where
    F: FnMut(usize) -> Result<Box<dyn Predictor>>,
{
    let folds = kfold_indices(examples.len(), k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for (i, fold) in folds.iter().enumerate() {
        let mut run = || -> Result<MetricReport> {
            let n = fold.train.len();
            let cut = ((n as f64 * INNER_TRAIN_FRACTION) as usize).min(n - 1);
            if cut == 0 {
                return Err(ValidationError::range(
                    "examples",
                    format!("training part of {n} examples is too small for an inner split"),
                    n,
                )
                .into());
            }
            let pick = |idx: &[usize]| idx.iter().map(|&j| examples[j].clone()).collect::<Vec<_>>();
            let (train, valid, test) = (pick(&fold.train[..cut]), pick(&fold.train[cut..]), pick(&fold.test));
            let mut model = factory(i)?;
            model.fit(&train, &valid)?;
            model.load_model()?;
            model.inference(&test)?;
            model.get_results()?.evaluate()
        };
        reports.push(run().map_err(|e| Error::Fold {
            fold: i,
            source: Box::new(e),
        })?);
    }
    let (mean, std) = aggregate(&reports);
    Ok(CvReport {
        folds: reports,
        mean,
        std,
    })
}

/// Per-metric mean and population standard deviation.
pub fn aggregate(reports: &[MetricReport]) -> (IndexMap<String, f64>, IndexMap<String, f64>) {
    let mut mean = IndexMap::new();
    let mut std = IndexMap::new();
    let Some(first) = reports.first() else {
        return (mean, std);
    };
    for name in first.metrics.keys() {
        let values: Option<Vec<f64>> = reports.iter().map(|r| r.get(name)).collect();
        let Some(values) = values else { continue };
        let m = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
        mean.insert(name.clone(), m);
        std.insert(name.clone(), var.sqrt());
    }
    (mean, std)
}
