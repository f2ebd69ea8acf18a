use std::collections::HashSet;
use std::path::Path;
use std::thread;

use chrono::Duration;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::events::parse_events;
use super::patients::{build_patients, PatientRecord};
use super::split::{split, SplitSpec};
use super::tasks::{LabeledExample, TaskSpec, TASK_NAMES};
use super::tensorize::EpisodeTensor;
use super::vocab::{build_vocabulary, Vocabulary, UNK};
use crate::common::{check_count, check_parameter, partition_ranges, Bound, DataKind, TaskKind, ValidationError};
use crate::error::{Error, Result};
use crate::fsutil;

pub const DATASET_FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const VOCAB_FILE: &str = "vocab.txt";
const SPLIT_FILES: [&str; 3] = ["train.jsonl", "valid.jsonl", "test.jsonl"];

/// Knobs for turning raw events into a labeled, split dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Events at most this many hours apart share a visit.
    pub visit_gap_hours: f64,
    /// Mortality horizon after the last visit start, in days (inclusive).
    pub horizon_days: f64,
    pub max_visits: usize,
    pub min_count: usize,
    pub data_kind: DataKind,
    /// Code sets for the phenotyping task, one label each.
    pub phenotypes: Vec<Vec<String>>,
    pub split: SplitSpec,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            visit_gap_hours: 24.0,
            horizon_days: 30.0,
            max_visits: 10,
            min_count: 1,
            data_kind: DataKind::Sequence,
            phenotypes: Vec::new(),
            split: SplitSpec::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        check_parameter(
            self.visit_gap_hours,
            0.0,
            1e7,
            "visit_gap_hours",
            Bound::Exclusive,
            Bound::Inclusive,
        )?;
        check_parameter(
            self.horizon_days,
            0.0,
            1e6,
            "horizon_days",
            Bound::Exclusive,
            Bound::Inclusive,
        )?;
        check_count(self.max_visits, 1, 100_000, "max_visits")?;
        check_count(self.min_count, 0, usize::MAX >> 12, "min_count")?;
        self.data_kind.ensure_supported()?;
        self.split.validate()
    }

    pub fn visit_gap(&self) -> Duration {
        Duration::milliseconds((self.visit_gap_hours * 3_600_000.0).round() as i64)
    }

    pub fn horizon(&self) -> Duration {
        Duration::milliseconds((self.horizon_days * 86_400_000.0).round() as i64)
    }

    /// Resolves a task name against this configuration.
    pub fn task_spec(&self, name: &str) -> Result<TaskSpec, ValidationError> {
        let spec = match name {
            "mortality" => TaskSpec::Mortality {
                horizon: self.horizon(),
            },
            "phenotyping" => TaskSpec::Phenotyping {
                phenotypes: self.phenotypes.clone(),
            },
            other => {
                return Err(ValidationError::schema(
                    "task",
                    format!("unknown task {other:?}; allowed tasks: {}", TASK_NAMES.join(", ")),
                    other,
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub source_sha256: String,
}

/// A tensorized, labeled and split task dataset.
///
/// Splits are disjoint by patient id and every example shares one
/// `(max_visits, vocab_size, label_dim)` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    pub exp_id: String,
    pub task: TaskKind,
    pub data_kind: DataKind,
    pub vocab: Vocabulary,
    pub max_visits: usize,
    pub label_dim: usize,
    pub train: Vec<LabeledExample>,
    pub valid: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub provenance: Provenance,
}

impl ExperimentDataset {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn splits(&self) -> [(&'static str, &[LabeledExample]); 3] {
        [("train", &self.train), ("valid", &self.valid), ("test", &self.test)]
    }

    /// All examples, train then valid then test.
    pub fn examples(&self) -> impl Iterator<Item = &LabeledExample> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    /// The on-disk artifact as `(file name, bytes)` pairs.
    pub fn to_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let meta = Meta {
            format_version: DATASET_FORMAT_VERSION,
            exp_id: self.exp_id.clone(),
            task: self.task,
            data_kind: self.data_kind,
            max_visits: self.max_visits,
            vocab_size: self.vocab.len(),
            label_dim: self.label_dim,
            seed: self.provenance.seed,
            ratios: self.provenance.ratios,
            source_sha256: self.provenance.source_sha256.clone(),
        };
        let mut meta_bytes = serde_json::to_vec_pretty(&meta).expect("meta serializes");
        meta_bytes.push(b'\n');

        let mut vocab_bytes = Vec::new();
        for code in self.vocab.codes() {
            vocab_bytes.extend_from_slice(code.as_bytes());
            vocab_bytes.push(b'\n');
        }

        let mut files = vec![(META_FILE, meta_bytes), (VOCAB_FILE, vocab_bytes)];
        for (name, (_, examples)) in SPLIT_FILES.iter().zip(self.splits()) {
            let mut buf = Vec::new();
            for ex in examples {
                let record = ExampleRecord {
                    patient_id: ex.patient_id.clone(),
                    features: ex.x.to_rows(),
                    mask: ex.x.mask().to_vec(),
                    y: ex.y.clone(),
                };
                serde_json::to_writer(&mut buf, &record).expect("example serializes");
                buf.push(b'\n');
            }
            files.push((name, buf));
        }
        files
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    format_version: u32,
    exp_id: String,
    task: TaskKind,
    data_kind: DataKind,
    #[serde(rename = "T")]
    max_visits: usize,
    #[serde(rename = "V")]
    vocab_size: usize,
    #[serde(rename = "C")]
    label_dim: usize,
    seed: u64,
    ratios: [f64; 3],
    source_sha256: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleRecord {
    patient_id: String,
    features: Vec<Vec<u8>>,
    mask: Vec<u8>,
    y: Vec<u8>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Labels every patient, fanning out over `n_workers` threads.
///
/// Patients are cut into contiguous id-ordered chunks by
/// [`partition_tasks`](crate::common::partition_tasks) and the per-chunk
/// results are concatenated in chunk order, so the output does not depend on
/// the worker count.
pub fn label_patients(
    patients: &[PatientRecord],
    vocab: &Vocabulary,
    max_visits: usize,
    task: &TaskSpec,
    n_workers: usize,
) -> Result<Vec<LabeledExample>, ValidationError> {
    check_count(n_workers, 1, 4096, "n_workers")?;
    check_count(max_visits, 1, 100_000, "max_visits")?;
    task.validate()?;
    if patients.is_empty() {
        return Err(ValidationError::empty("patients", "no patients to label"));
    }
    let label_chunk = |chunk: &[PatientRecord]| -> Vec<LabeledExample> {
        chunk.iter().filter_map(|p| task.label(p, vocab, max_visits)).collect()
    };
    let ranges = partition_ranges(patients.len(), n_workers)?;
    let examples: Vec<LabeledExample> = if ranges.len() == 1 {
        label_chunk(patients)
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .iter()
                .map(|r| {
                    let chunk = &patients[r.clone()];
                    scope.spawn(move || label_chunk(chunk))
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("labeling worker panicked"))
                .collect()
        })
    };
    if examples.is_empty() {
        return Err(ValidationError::empty(
            "patients",
            format!("every patient was skipped by the {} task", task.name()),
        ));
    }
    Ok(examples)
}

/// Full pipeline on in-memory CSV bytes: parse, group into patients, build
/// the vocabulary, label, split.
pub fn generate_dataset_from_bytes(
    exp_id: &str,
    source: &[u8],
    task_name: &str,
    config: &PreprocessConfig,
    n_workers: usize,
) -> Result<ExperimentDataset> {
    config.validate()?;
    check_count(n_workers, 1, 4096, "n_workers")?;
    let task = config.task_spec(task_name)?;

    let events = parse_events(source)?;
    let patients = build_patients(&events, config.visit_gap())?;
    let vocab = build_vocabulary(&patients, config.min_count)?;
    let examples = label_patients(&patients, &vocab, config.max_visits, &task, n_workers)?;
    let parts = split(&examples, &config.split)?;

    Ok(ExperimentDataset {
        exp_id: exp_id.to_string(),
        task: task.kind(),
        data_kind: config.data_kind,
        vocab,
        max_visits: config.max_visits,
        label_dim: task.label_dim(),
        train: parts.train,
        valid: parts.valid,
        test: parts.test,
        provenance: Provenance {
            seed: config.split.seed,
            ratios: config.split.ratios,
            source_sha256: sha256_hex(source),
        },
    })
}

pub fn generate_dataset(
    exp_id: &str,
    source: &Path,
    task_name: &str,
    config: &PreprocessConfig,
    n_workers: usize,
) -> Result<ExperimentDataset> {
    let bytes = std::fs::read(source).map_err(|e| Error::io(source, e))?;
    generate_dataset_from_bytes(exp_id, &bytes, task_name, config, n_workers)
}

/// Writes the artifact directory atomically (temp dir, then rename).
pub fn save_dataset(dataset: &ExperimentDataset, dir: &Path) -> Result<()> {
    let files = dataset.to_files();
    fsutil::atomic_dir(dir, |tmp| {
        for (name, bytes) in &files {
            let path = tmp.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    })
}

fn corrupt(file: &Path, message: impl std::fmt::Display) -> Error {
    ValidationError::schema("dataset", format!("{}: {message}", file.display()), file.display()).into()
}

pub fn load_dataset(dir: &Path) -> Result<ExperimentDataset> {
    let meta_path = dir.join(META_FILE);
    if !meta_path.is_file() {
        return Err(ValidationError::schema(
            "dataset",
            format!("no saved dataset in {} (missing {META_FILE})", dir.display()),
            dir.display(),
        )
        .into());
    }
    let raw = fsutil::read_to_string(&meta_path)?;
    let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| corrupt(&meta_path, e))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(DATASET_FORMAT_VERSION) => {}
        other => {
            let found = other.map_or_else(|| "missing".to_string(), |v| v.to_string());
            return Err(corrupt(
                &meta_path,
                format!("unsupported format_version {found}; this build reads format_version {DATASET_FORMAT_VERSION}"),
            ));
        }
    }
    let meta: Meta = serde_json::from_value(value).map_err(|e| corrupt(&meta_path, e))?;

    let vocab_path = dir.join(VOCAB_FILE);
    let vocab_raw = fsutil::read_to_string(&vocab_path)?;
    let mut codes: Vec<&str> = vocab_raw.lines().collect();
    if codes.last() != Some(&UNK) {
        return Err(corrupt(&vocab_path, "last line must be <UNK>"));
    }
    codes.pop();
    let vocab = Vocabulary::from_codes(codes).map_err(|e| corrupt(&vocab_path, e.message))?;
    if vocab.len() != meta.vocab_size {
        return Err(corrupt(
            &vocab_path,
            format!("{} codes but meta.json says V = {}", vocab.len(), meta.vocab_size),
        ));
    }

    let mut splits: Vec<Vec<LabeledExample>> = Vec::with_capacity(3);
    let mut seen = HashSet::new();
    for name in SPLIT_FILES {
        let path = dir.join(name);
        let raw = fsutil::read_to_string(&path)?;
        let mut examples = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            let lineno = i + 1;
            let rec: ExampleRecord =
                serde_json::from_str(line).map_err(|e| corrupt(&path, format!("line {lineno}: {e}")))?;
            if rec.features.len() != meta.max_visits || rec.features.iter().any(|r| r.len() != meta.vocab_size) {
                return Err(corrupt(
                    &path,
                    format!(
                        "line {lineno}: features are not {}x{}",
                        meta.max_visits, meta.vocab_size
                    ),
                ));
            }
            let x = EpisodeTensor::from_rows(&rec.features, &rec.mask)
                .ok_or_else(|| corrupt(&path, format!("line {lineno}: invalid features/mask")))?;
            if rec.y.len() != meta.label_dim || rec.y.iter().any(|&b| b > 1) {
                return Err(corrupt(
                    &path,
                    format!("line {lineno}: y must be {} values in {{0,1}}", meta.label_dim),
                ));
            }
            if !seen.insert(rec.patient_id.clone()) {
                return Err(corrupt(
                    &path,
                    format!("line {lineno}: patient {} appears twice", rec.patient_id),
                ));
            }
            examples.push(LabeledExample {
                patient_id: rec.patient_id,
                x,
                y: rec.y,
            });
        }
        splits.push(examples);
    }
    let test = splits.pop().unwrap_or_default();
    let valid = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();

    Ok(ExperimentDataset {
        exp_id: meta.exp_id,
        task: meta.task,
        data_kind: meta.data_kind,
        vocab,
        max_visits: meta.max_visits,
        label_dim: meta.label_dim,
        train,
        valid,
        test,
        provenance: Provenance {
            seed: meta.seed,
            ratios: meta.ratios,
            source_sha256: meta.source_sha256,
        },
    })
}
