//! Per-epoch checkpoint files.
//!
//! A checkpoint is one JSON header line followed by one line per parameter:
//! `name<TAB>d1,d2,...<TAB>v1 v2 ...`, with floats in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ModelKind;
use crate::common::ValidationError;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelKind,
    pub epoch: usize,
    pub valid_score: f64,
    pub valid_metric_name: String,
    pub config_digest: String,
    pub input_dim: usize,
    pub max_visits: usize,
    pub output_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<ParamRecord>,
}

pub fn checkpoint_file_name(epoch: usize) -> String {
    format!("epoch_{epoch}.ckpt")
}

fn corrupt(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Validation(ValidationError::schema(
        "checkpoint",
        format!("corrupted checkpoint {}: {message}", path.display()),
        path.display(),
    ))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for p in &self.params {
            let shape: Vec<String> = p.shape.iter().map(usize::to_string).collect();
            let values: Vec<String> = p.values.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&format!("{}\t{}\t{}\n", p.name, shape.join(","), values.join(" ")));
        }
        out.into_bytes()
    }

    /// Parses a checkpoint; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header_line = lines.next().ok_or_else(|| corrupt(path, "empty file"))?;
        let header = parse_header(header_line, path)?;
        let mut params = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut parts = line.split('\t');
            let (Some(name), Some(shape), Some(values), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(corrupt(path, format!("line {} is not a parameter record", i + 2)));
            };
            let shape = shape
                .split(',')
                .map(|d| d.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| corrupt(path, format!("line {}: bad shape: {e}", i + 2)))?;
            let values = values
                .split(' ')
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| corrupt(path, format!("line {}: bad value: {e}", i + 2)))?;
            if shape.iter().product::<usize>() != values.len() || values.iter().any(|v| !v.is_finite()) {
                return Err(corrupt(
                    path,
                    format!("line {}: values do not fill shape {shape:?}", i + 2),
                ));
            }
            params.push(ParamRecord {
                name: name.to_string(),
                shape,
                values,
            });
        }
        Ok(Self { header, params })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }
}

fn parse_header(line: &str, path: &Path) -> Result<CheckpointHeader> {
    let header: CheckpointHeader = serde_json::from_str(line).map_err(|e| corrupt(path, format!("header: {e}")))?;
    if header.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(corrupt(
            path,
            format!("unsupported format_version {}", header.format_version),
        ));
    }
    if header.epoch == 0 || !(0.0..=1.0).contains(&header.valid_score) {
        return Err(corrupt(path, "epoch or valid_score out of range"));
    }
    Ok(header)
}

/// Reads only the header line of a checkpoint.
pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let line = text.lines().next().ok_or_else(|| corrupt(path, "empty file"))?;
    parse_header(line, path)
}

/// Lists `(epoch, path)` for every `epoch_<k>.ckpt` in `dir`, by epoch.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(epoch) = name
            .strip_prefix("epoch_")
            .and_then(|s| s.strip_suffix(".ckpt"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            out.push((epoch, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Index of the highest score; ties go to the earliest entry.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Picks the checkpoint in `dir` with the highest validation score (earliest
/// epoch on ties). Every header is read, so a corrupt file anywhere fails.
pub fn select_checkpoint(dir: &Path) -> Result<(usize, PathBuf)> {
    let found = list_checkpoints(dir)?;
    if found.is_empty() {
        return Err(Error::NoCheckpoints(dir.to_path_buf()));
    }
    let mut scores = Vec::with_capacity(found.len());
    for (epoch, path) in &found {
        let header = read_header(path)?;
        if header.epoch != *epoch {
            return Err(corrupt(
                path,
                format!("header epoch {} does not match file name", header.epoch),
            ));
        }
        scores.push(header.valid_score);
    }
    let i = select_best(&scores).expect("non-empty");
    Ok(found[i].clone())
}

/// Deletes every checkpoint file in `dir`.
pub fn clear_checkpoints(dir: &Path) -> Result<()> {
    for (_, path) in list_checkpoints(dir)? {
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(epoch: usize, score: f64) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                format_version: CHECKPOINT_FORMAT_VERSION,
                model: ModelKind::Gru,
                epoch,
                valid_score: score,
                valid_metric_name: "accuracy".into(),
                config_digest: "abc".into(),
                input_dim: 2,
                max_visits: 3,
                output_dim: 1,
                hidden_dim: 2,
            },
            params: vec![ParamRecord {
                name: "readout.weight".into(),
                shape: vec![2, 1],
                values: vec![0.1 + 0.2, -1e-300],
            }],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample(1, 0.5);
        let back = Checkpoint::parse(std::str::from_utf8(&c.to_bytes()).unwrap(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select_best(&[0.6, 0.9, 0.7]), Some(1));
        assert_eq!(select_best(&[0.8, 0.8, 0.8]), Some(0));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn selects_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(select_checkpoint(dir.path()), Err(Error::NoCheckpoints(_))));
        for (e, s) in [(1, 0.6), (2, 0.9), (3, 0.7)] {
            sample(e, s).write(&dir.path().join(checkpoint_file_name(e))).unwrap();
        }
        assert_eq!(select_checkpoint(dir.path()).unwrap().0, 2);
        clear_checkpoints(dir.path()).unwrap();
        assert!(list_checkpoints(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn corruption_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("epoch_1.ckpt");
        fs::write(&path, "{not json}\n").unwrap();
        let err = select_checkpoint(dir.path()).unwrap_err();
        assert_eq!(err.code(), "SchemaViolation");
        assert!(err.to_string().contains("epoch_1.ckpt"), "{err}");
        let mut bytes = sample(1, 0.5).to_bytes();
        bytes.truncate(bytes.len() - 4);
        fs::write(&path, bytes).unwrap();
        assert_eq!(Checkpoint::read(&path).unwrap_err().code(), "SchemaViolation");
    }
}
