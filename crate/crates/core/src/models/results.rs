use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::common::ValidationError;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, LabelMatrix, MetricReport, ScoreMatrix};
use crate::fsutil::{atomic_write, read_to_string};

/// Predictions on a test split: row `i` of `hat_y`, `y` and `ids` belong
/// to the same example.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub ids: Vec<String>,
    pub y: Vec<Vec<u8>>,
    pub hat_y: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultLine {
    id: String,
    y: Vec<u8>,
    hat_y: Vec<f64>,
}

impl ResultsBundle {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn y_f64(&self) -> Vec<Vec<f64>> {
        self.y.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
    }

    /// Checks shapes and value ranges.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.ids.len() != self.y.len() || self.ids.len() != self.hat_y.len() {
            return Err(ValidationError::schema(
                "results",
                format!(
                    "{} ids, {} label rows, {} score rows",
                    self.ids.len(),
                    self.y.len(),
                    self.hat_y.len()
                ),
                "",
            ));
        }
        LabelMatrix::from_rows(&self.y)?;
        let scores = ScoreMatrix::from_rows(&self.hat_y)?;
        if scores.cols() != self.y[0].len() {
            return Err(ValidationError::schema(
                "results",
                format!("hat_y has {} columns but y has {}", scores.cols(), self.y[0].len()),
                "",
            ));
        }
        Ok(())
    }

    pub fn evaluate(&self) -> Result<MetricReport> {
        evaluate(&ScoreMatrix::from_rows(&self.hat_y)?, &LabelMatrix::from_rows(&self.y)?)
    }

    /// One JSON object `{id, y, hat_y}` per line.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = String::new();
        for ((id, y), hat_y) in self.ids.iter().zip(&self.y).zip(&self.hat_y) {
            let line = ResultLine {
                id: id.clone(),
                y: y.clone(),
                hat_y: hat_y.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("line serializes"));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ValidationError> {
        let mut bundle = ResultsBundle {
            ids: Vec::new(),
            y: Vec::new(),
            hat_y: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ResultLine = serde_json::from_str(line).map_err(|e| {
                ValidationError::schema("results", format!("line {}: {e}", i + 1), format!("line={}", i + 1))
            })?;
            bundle.ids.push(rec.id);
            bundle.y.push(rec.y);
            bundle.hat_y.push(rec.hat_y);
        }
        if bundle.is_empty() {
            return Err(ValidationError::empty("results", "results file has no records"));
        }
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_jsonl())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::from_jsonl(&text).map_err(|mut e| {
            e.message = format!("{}: {}", path.display(), e.message);
            Error::Validation(e)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common::ErrorCode;

    #[test]
    fn jsonl_round_trip() {
        let b = ResultsBundle {
            ids: vec!["p1".into(), "p2".into()],
            y: vec![vec![1], vec![0]],
            hat_y: vec![vec![0.1 + 0.7], vec![1.0 / 3.0]],
        };
        let text = String::from_utf8(b.to_jsonl()).unwrap();
        assert!(text.starts_with(r#"{"id":"p1","y":[1],"hat_y":["#));
        assert_eq!(ResultsBundle::from_jsonl(&text).unwrap(), b);
    }

    #[test]
    fn rejects_bad_files() {
        assert_eq!(ResultsBundle::from_jsonl("").unwrap_err().code, ErrorCode::EmptyInput);
        assert_eq!(
            ResultsBundle::from_jsonl("{").unwrap_err().code,
            ErrorCode::SchemaViolation
        );
        let bad = r#"{"id":"a","y":[1],"hat_y":[1.5]}"#;
        assert_eq!(
            ResultsBundle::from_jsonl(bad).unwrap_err().code,
            ErrorCode::RangeViolation
        );
        let ragged = "{\"id\":\"a\",\"y\":[1],\"hat_y\":[0.5,0.5]}";
        assert_eq!(
            ResultsBundle::from_jsonl(ragged).unwrap_err().code,
            ErrorCode::SchemaViolation
        );
    }
}
