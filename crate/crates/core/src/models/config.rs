use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::common::{check_count, check_parameter, Bound, ValidationError};
use crate::preprocess::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Gru,
    Lstm,
    Tcnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lr, ModelKind::Gru, ModelKind::Lstm, ModelKind::Tcnn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Gru => "gru",
            ModelKind::Lstm => "lstm",
            ModelKind::Tcnn => "tcnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            ValidationError::type_mismatch(
                "model",
                format!("unknown model {s:?}, expected one of lr, gru, lstm, tcnn"),
                s,
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Validation score used to pick the best checkpoint.
///
/// `task_default` is accuracy at 0.5 for binary, top-1 accuracy for
/// multiclass and micro-F1 for multilabel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    TaskDefault,
    Auroc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_batchsize: usize,
    pub n_epoch: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Accepted for API compatibility; training always runs on the CPU.
    pub use_gpu: bool,
    pub hidden_dim: usize,
    pub max_grad_norm: f64,
    pub selection_metric: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_batchsize: 20,
            n_epoch: 100,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 42,
            use_gpu: false,
            hidden_dim: 64,
            max_grad_norm: 5.0,
            selection_metric: SelectionMetric::TaskDefault,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        check_count(self.n_batchsize, 1, 1_000_000, "n_batchsize")?;
        check_count(self.n_epoch, 1, 100_000, "n_epoch")?;
        check_count(self.hidden_dim, 1, 4096, "hidden_dim")?;
        check_parameter(
            self.learning_rate,
            0.0,
            10.0,
            "learning_rate",
            Bound::Exclusive,
            Bound::Inclusive,
        )?;
        check_parameter(
            self.max_grad_norm,
            0.0,
            1e6,
            "max_grad_norm",
            Bound::Exclusive,
            Bound::Inclusive,
        )?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}
