use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use healthpipe::models::{ModelKind, TrainConfig};
use healthpipe::preprocess::PreprocessConfig;
use healthpipe::{check_count, Error, Result, ValidationError};

/// Everything `run` needs, loadable from JSON. Missing fields take their
/// defaults; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub exp_id: String,
    pub expmodel_id: String,
    /// Event CSV; relative paths resolve against the config file's directory.
    pub input: Option<PathBuf>,
    pub task: String,
    pub model: ModelKind,
    pub n_workers: usize,
    pub train: TrainConfig,
    pub preprocess: PreprocessConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            exp_id: "default".into(),
            expmodel_id: "default".into(),
            input: None,
            task: "mortality".into(),
            model: ModelKind::Gru,
            n_workers: 1,
            train: TrainConfig::default(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ValidationError::schema("config", format!("{}: {e}", path.display()), path.display()))?;
        if let (Some(input), Some(dir)) = (&config.input, path.parent()) {
            if input.is_relative() {
                config.input = Some(dir.join(input));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        check_token("exp_id", &self.exp_id)?;
        check_token("expmodel_id", &self.expmodel_id)?;
        check_count(self.n_workers, 1, 4096, "n_workers")?;
        self.preprocess.validate()?;
        self.preprocess.task_spec(&self.task)?;
        self.train.validate()
    }
}

/// Identifiers become directory names, so only `[A-Za-z0-9_.-]` is allowed
/// and a leading dot is not.
pub fn check_token(name: &str, value: &str) -> Result<(), ValidationError> {
    let ok = !value.is_empty()
        && value.len() <= 128
        && !value.starts_with('.')
        && value.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
    if ok {
        Ok(())
    } else {
        Err(ValidationError::type_mismatch(
            name,
            format!("{value:?} must be 1-128 characters from [A-Za-z0-9_.-] and not start with '.'"),
            value,
        ))
    }
}

/// Artifact layout under the experiment root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

pub const HOME_VAR: &str = "HEALTHPIPE_HOME";

impl Layout {
    /// `explicit`, else `$HEALTHPIPE_HOME`, else `./experiments`.
    pub fn resolve(explicit: Option<&Path>) -> Self {
        let root = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(HOME_VAR).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("experiments"));
        Self { root }
    }

    pub fn data_dir(&self, exp_id: &str) -> PathBuf {
        self.root.join(exp_id).join("data")
    }

    pub fn checkpoint_dir(&self, exp_id: &str, expmodel_id: &str) -> PathBuf {
        self.root.join(exp_id).join("checkpoints").join(expmodel_id)
    }

    pub fn model_file(&self, exp_id: &str, expmodel_id: &str) -> PathBuf {
        self.checkpoint_dir(exp_id, expmodel_id).join("model.json")
    }

    pub fn results_file(&self, exp_id: &str, expmodel_id: &str) -> PathBuf {
        self.root
            .join(exp_id)
            .join("results")
            .join(format!("{expmodel_id}.jsonl"))
    }

    pub fn report_file(&self, exp_id: &str, expmodel_id: &str) -> PathBuf {
        self.root
            .join(exp_id)
            .join("reports")
            .join(format!("{expmodel_id}.json"))
    }
}

/// Stored next to the checkpoints so `infer` can rebuild the same model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub train: TrainConfig,
}
