//! Shared vocabulary: task and data kinds, structured validation errors,
//! parameter range checks and balanced work partitioning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prediction task kind, inferred from labels or fixed by the task generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "binary")]
    BinaryClassification,
    #[serde(rename = "multiclass")]
    MultiClass,
    #[serde(rename = "multilabel")]
    MultiLabel,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::BinaryClassification => "binary",
            TaskKind::MultiClass => "multiclass",
            TaskKind::MultiLabel => "multilabel",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(TaskKind::BinaryClassification),
            "multiclass" => Ok(TaskKind::MultiClass),
            "multilabel" => Ok(TaskKind::MultiLabel),
            other => Err(ValidationError::new(
                ErrorCode::SchemaViolation,
                format!("task: unknown task kind {other:?}, expected one of binary, multiclass, multilabel"),
                other,
            )),
        }
    }
}

/// Input modality. Only `Sequence` and `Signal` have a preprocessing path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Sequence,
    Image,
    Signal,
    Text,
}

impl DataKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Sequence => "sequence",
            DataKind::Image => "image",
            DataKind::Signal => "signal",
            DataKind::Text => "text",
        }
    }

    /// Errors with `UnsupportedKind` for modalities without a preprocessing path.
    pub fn ensure_supported(self) -> Result<Self, ValidationError> {
        match self {
            DataKind::Sequence | DataKind::Signal => Ok(self),
            DataKind::Image | DataKind::Text => Err(ValidationError::new(
                ErrorCode::UnsupportedKind,
                format!(
                    "data_kind: unsupported data kind {:?}; supported kinds are sequence, signal",
                    self.as_str()
                ),
                self.as_str(),
            )),
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequence" => Ok(DataKind::Sequence),
            "image" => Ok(DataKind::Image),
            "signal" => Ok(DataKind::Signal),
            "text" => Ok(DataKind::Text),
            other => Err(ValidationError::new(
                ErrorCode::SchemaViolation,
                format!("data_kind: unknown data kind {other:?}, expected one of sequence, image, signal, text"),
                other,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    RangeViolation,
    TypeMismatch,
    EmptyInput,
    SchemaViolation,
    UnsupportedKind,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::RangeViolation => "RangeViolation",
            ErrorCode::TypeMismatch => "TypeMismatch",
            ErrorCode::EmptyInput => "EmptyInput",
            ErrorCode::SchemaViolation => "SchemaViolation",
            ErrorCode::UnsupportedKind => "UnsupportedKind",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejected input. `message` always names the offending parameter;
/// `context` carries the offending value (or location) as text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {message}")]
pub struct ValidationError {
    pub code: ErrorCode,
    pub message: String,
    pub context: String,
}

impl ValidationError {
    pub fn new(code: ErrorCode, message: impl Into<String>, context: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            context: context.into(),
        }
    }

    pub fn range(name: &str, message: impl fmt::Display, context: impl fmt::Display) -> Self {
        Self::new(
            ErrorCode::RangeViolation,
            format!("{name}: {message}"),
            context.to_string(),
        )
    }

    pub fn empty(name: &str, message: impl fmt::Display) -> Self {
        Self::new(ErrorCode::EmptyInput, format!("{name}: {message}"), String::new())
    }

    pub fn schema(name: &str, message: impl fmt::Display, context: impl fmt::Display) -> Self {
        Self::new(
            ErrorCode::SchemaViolation,
            format!("{name}: {message}"),
            context.to_string(),
        )
    }

    pub fn type_mismatch(name: &str, message: impl fmt::Display, context: impl fmt::Display) -> Self {
        Self::new(
            ErrorCode::TypeMismatch,
            format!("{name}: {message}"),
            context.to_string(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Inclusive,
    Exclusive,
}

/// Returns `value` unchanged when it lies within `[low, high]` (each end
/// inclusive or exclusive as requested).
///
/// Non-finite values are `TypeMismatch`; finite values outside the bounds are
/// `RangeViolation`. Both messages name `name`, the value and the bounds.
pub fn check_parameter(
    value: f64,
    low: f64,
    high: f64,
    name: &str,
    low_bound: Bound,
    high_bound: Bound,
) -> Result<f64, ValidationError> {
    debug_assert!(low <= high, "check_parameter: low > high for {name}");
    debug_assert!(!name.is_empty());
    if !value.is_finite() {
        return Err(ValidationError::type_mismatch(
            name,
            format!("expected a finite number, got {value}"),
            value,
        ));
    }
    let above_low = match low_bound {
        Bound::Inclusive => value >= low,
        Bound::Exclusive => value > low,
    };
    let below_high = match high_bound {
        Bound::Inclusive => value <= high,
        Bound::Exclusive => value < high,
    };
    if above_low && below_high {
        return Ok(value);
    }
    let open = if low_bound == Bound::Inclusive { '[' } else { '(' };
    let close = if high_bound == Bound::Inclusive { ']' } else { ')' };
    Err(ValidationError::range(
        name,
        format!("value {value} outside {open}{low}, {high}{close}"),
        value,
    ))
}

/// Integer form of [`check_parameter`] with both ends inclusive.
pub fn check_count(value: usize, low: usize, high: usize, name: &str) -> Result<usize, ValidationError> {
    check_parameter(
        value as f64,
        low as f64,
        high as f64,
        name,
        Bound::Inclusive,
        Bound::Inclusive,
    )?;
    Ok(value)
}

/// Splits `n_tasks` units of work across at most `n_workers` workers.
///
/// The result has `min(n_tasks, n_workers)` entries summing to `n_tasks`,
/// differs by at most one between workers, and hands the remainder to the
/// lowest-indexed workers so counts are non-increasing.
pub fn partition_tasks(n_tasks: usize, n_workers: usize) -> Result<Vec<usize>, ValidationError> {
    if n_tasks < 1 {
        return Err(ValidationError::range("n_tasks", "must be at least 1", n_tasks));
    }
    if n_workers < 1 {
        return Err(ValidationError::range("n_workers", "must be at least 1", n_workers));
    }
    let used = n_tasks.min(n_workers);
    let base = n_tasks / used;
    let extra = n_tasks % used;
    Ok((0..used).map(|i| base + usize::from(i < extra)).collect())
}

/// Half-open index ranges matching [`partition_tasks`] counts, in order.
pub fn partition_ranges(n_tasks: usize, n_workers: usize) -> Result<Vec<std::ops::Range<usize>>, ValidationError> {
    let counts = partition_tasks(n_tasks, n_workers)?;
    let mut start = 0;
    Ok(counts
        .into_iter()
        .map(|c| {
            let r = start..start + c;
            start += c;
            r
        })
        .collect())
}
