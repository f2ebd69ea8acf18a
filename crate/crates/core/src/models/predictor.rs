use std::path::{Path, PathBuf};

use super::checkpoint::{
    checkpoint_file_name, clear_checkpoints, select_checkpoint, Checkpoint, CheckpointHeader, ParamRecord,
    CHECKPOINT_FORMAT_VERSION,
};
use super::config::{ModelKind, OptimizerKind, SelectionMetric, TrainConfig};
use super::network::{check_dims, Network, SeqInput};
use super::results::ResultsBundle;
use crate::common::{TaskKind, ValidationError};
use crate::error::{Error, Result};
use crate::evaluate::{argmax, auroc, Confusion, DEFAULT_THRESHOLD};
use crate::nn::{clip_grad_norm, sigmoid, softmax_in_place, Adam, HasParameters, HeadLoss, Sgd, Tensor};
use crate::preprocess::{EpisodeTensor, LabeledExample};
use crate::rng::SplitMix64;

const INFERENCE_BATCH: usize = 256;

/// Input and output sizes a predictor is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// vocabulary size V
    pub input_dim: usize,
    /// visits per example T
    pub max_visits: usize,
    /// label dimension C
    pub output_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_score: f64,
    pub valid_metric_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub epochs: Vec<EpochRecord>,
    pub checkpoint_dir: PathBuf,
}

/// The shared contract of every model.
///
/// Call order: `fit` (or `load_model` on existing checkpoints) before
/// `inference`, and `inference` before `get_results`.
pub trait Predictor: Send {
    fn kind(&self) -> ModelKind;

    /// Trains, calling `observer` after each epoch's checkpoint is written.
    fn fit_observed(
        &mut self,
        train: &[LabeledExample],
        valid: &[LabeledExample],
        observer: &mut dyn FnMut(&EpochRecord),
    ) -> Result<FitSummary>;

    fn fit(&mut self, train: &[LabeledExample], valid: &[LabeledExample]) -> Result<FitSummary> {
        self.fit_observed(train, valid, &mut |_| {})
    }

    /// Loads the best checkpoint and returns its epoch.
    fn load_model(&mut self) -> Result<usize>;

    fn inference(&mut self, test: &[LabeledExample]) -> Result<()>;

    fn get_results(&self) -> Result<&ResultsBundle>;
}

/// The network-backed predictor used for every [`ModelKind`].
#[derive(Debug, Clone)]
pub struct NeuralPredictor {
    kind: ModelKind,
    task: TaskKind,
    dims: ModelDims,
    config: TrainConfig,
    checkpoint_dir: PathBuf,
    network: Network,
    ready: bool,
    selected_epoch: Option<usize>,
    results: Option<ResultsBundle>,
}

pub fn make_predictor(
    kind: ModelKind,
    dims: ModelDims,
    task: TaskKind,
    config: TrainConfig,
    checkpoint_dir: impl Into<PathBuf>,
) -> Result<NeuralPredictor> {
    config.validate()?;
    check_dims(kind, dims.input_dim, dims.max_visits, dims.output_dim)?;
    if task == TaskKind::BinaryClassification && dims.output_dim != 1 {
        return Err(ValidationError::range(
            "output_dim",
            "binary tasks have exactly one label column",
            dims.output_dim,
        )
        .into());
    }
    if task == TaskKind::MultiClass && dims.output_dim < 2 {
        return Err(ValidationError::range(
            "output_dim",
            "multiclass tasks need at least two classes",
            dims.output_dim,
        )
        .into());
    }
    if config.use_gpu {
        log::warn!("use_gpu is not supported; training on the CPU");
    }
    let network = Network::new(
        kind,
        dims.input_dim,
        config.hidden_dim,
        dims.output_dim,
        &mut SplitMix64::new(config.seed),
    );
    Ok(NeuralPredictor {
        kind,
        task,
        dims,
        config,
        checkpoint_dir: checkpoint_dir.into(),
        network,
        ready: false,
        selected_epoch: None,
        results: None,
    })
}

pub fn make_lr(
    dims: ModelDims,
    task: TaskKind,
    config: TrainConfig,
    dir: impl Into<PathBuf>,
) -> Result<NeuralPredictor> {
    make_predictor(ModelKind::Lr, dims, task, config, dir)
}

pub fn make_gru(
    dims: ModelDims,
    task: TaskKind,
    config: TrainConfig,
    dir: impl Into<PathBuf>,
) -> Result<NeuralPredictor> {
    make_predictor(ModelKind::Gru, dims, task, config, dir)
}

pub fn make_lstm(
    dims: ModelDims,
    task: TaskKind,
    config: TrainConfig,
    dir: impl Into<PathBuf>,
) -> Result<NeuralPredictor> {
    make_predictor(ModelKind::Lstm, dims, task, config, dir)
}

pub fn make_tcnn(
    dims: ModelDims,
    task: TaskKind,
    config: TrainConfig,
    dir: impl Into<PathBuf>,
) -> Result<NeuralPredictor> {
    make_predictor(ModelKind::Tcnn, dims, task, config, dir)
}

fn to_input(x: &EpisodeTensor) -> SeqInput {
    let data = x.rows().flatten().map(|&b| b as f64).collect();
    SeqInput {
        x: Tensor::from_vec(&[x.max_visits(), x.vocab_size()], data).expect("episode tensors are non-empty"),
        len: x.len(),
    }
}

fn targets(examples: &[&LabeledExample]) -> Tensor {
    let rows: Vec<Vec<f64>> = examples
        .iter()
        .map(|e| e.y.iter().map(|&v| v as f64).collect())
        .collect();
    Tensor::from_rows(&rows).expect("labels checked")
}

impl NeuralPredictor {
    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn checkpoint_dir(&self) -> &Path {
        &self.checkpoint_dir
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Epoch chosen by the last `load_model`.
    pub fn selected_epoch(&self) -> Option<usize> {
        self.selected_epoch
    }

    fn head(&self) -> HeadLoss {
        if self.task == TaskKind::MultiClass {
            HeadLoss::Softmax
        } else {
            HeadLoss::Sigmoid
        }
    }

    fn metric_name(&self) -> &'static str {
        match (self.config.selection_metric, self.task) {
            (SelectionMetric::TaskDefault, TaskKind::BinaryClassification) => "accuracy",
            (SelectionMetric::TaskDefault, TaskKind::MultiClass) => "top1_accuracy",
            (SelectionMetric::TaskDefault, TaskKind::MultiLabel) => "micro_f1",
            (SelectionMetric::Auroc, TaskKind::BinaryClassification) => "auroc",
            (SelectionMetric::Auroc, _) => "macro_auroc",
        }
    }

    fn check_examples(&self, split: &str, examples: &[LabeledExample]) -> Result<(), ValidationError> {
        if examples.is_empty() {
            return Err(ValidationError::empty(split, "split has no examples"));
        }
        for e in examples {
            let ctx = format!("patient_id={}", e.patient_id);
            if e.x.vocab_size() != self.dims.input_dim || e.x.max_visits() != self.dims.max_visits {
                return Err(ValidationError::schema(
                    split,
                    format!(
                        "example is {}x{}, model expects {}x{}",
                        e.x.max_visits(),
                        e.x.vocab_size(),
                        self.dims.max_visits,
                        self.dims.input_dim
                    ),
                    ctx,
                ));
            }
            if e.y.len() != self.dims.output_dim {
                return Err(ValidationError::schema(
                    split,
                    format!(
                        "label has {} columns, model expects {}",
                        e.y.len(),
                        self.dims.output_dim
                    ),
                    ctx,
                ));
            }
            if e.y.iter().any(|&v| v > 1) {
                return Err(ValidationError::range(split, "labels must be 0 or 1", ctx));
            }
            if self.task == TaskKind::MultiClass && e.y.iter().map(|&v| v as usize).sum::<usize>() != 1 {
                return Err(ValidationError::schema(split, "multiclass labels must be one-hot", ctx));
            }
        }
        Ok(())
    }

    fn probabilities(&self, inputs: &[SeqInput]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(INFERENCE_BATCH) {
            let refs: Vec<&SeqInput> = chunk.iter().collect();
            let logits = self.network.logits(&refs)?;
            for i in 0..logits.rows() {
                let mut row = logits.row(i).to_vec();
                match self.head() {
                    HeadLoss::Softmax => softmax_in_place(&mut row),
                    HeadLoss::Sigmoid => row.iter_mut().for_each(|v| *v = sigmoid(*v)),
                }
                out.push(row);
            }
        }
        Ok(out)
    }

    /// Class probabilities for `examples`, in order.
    pub fn predict_proba(&self, examples: &[LabeledExample]) -> Result<Vec<Vec<f64>>> {
        if !self.ready {
            return Err(Error::Protocol("predict before fit or load_model".into()));
        }
        self.check_shapes(examples)?;
        let inputs: Vec<SeqInput> = examples.iter().map(|e| to_input(&e.x)).collect();
        self.probabilities(&inputs)
    }

    fn check_shapes(&self, examples: &[LabeledExample]) -> Result<()> {
        for e in examples {
            if e.x.vocab_size() != self.dims.input_dim || e.x.max_visits() != self.dims.max_visits {
                return Err(Error::Shape(format!(
                    "example {} is {}x{}, model was trained on {}x{}",
                    e.patient_id,
                    e.x.max_visits(),
                    e.x.vocab_size(),
                    self.dims.max_visits,
                    self.dims.input_dim
                )));
            }
            if e.y.len() != self.dims.output_dim {
                return Err(Error::Shape(format!(
                    "example {} has {} label columns, model has {}",
                    e.patient_id,
                    e.y.len(),
                    self.dims.output_dim
                )));
            }
        }
        Ok(())
    }

    fn valid_score(&self, probs: &[Vec<f64>], valid: &[LabeledExample]) -> Result<f64> {
        let d = self.dims.output_dim;
        Ok(match (self.config.selection_metric, self.task) {
            (SelectionMetric::TaskDefault, TaskKind::MultiClass) => {
                let hits = probs.iter().zip(valid).filter(|(p, e)| e.y[argmax(p)] == 1).count();
                hits as f64 / valid.len() as f64
            }
            (SelectionMetric::TaskDefault, _) => {
                let mut c = Confusion::default();
                for (p, e) in probs.iter().zip(valid) {
                    for (&pj, &yj) in p.iter().zip(&e.y) {
                        c.add(pj >= DEFAULT_THRESHOLD, yj == 1);
                    }
                }
                if self.task == TaskKind::BinaryClassification {
                    c.accuracy()
                } else {
                    c.f1()
                }
            }
            (SelectionMetric::Auroc, _) => {
                let mut sum = 0.0;
                let mut live = 0;
                for j in 0..d {
                    let y: Vec<u8> = valid.iter().map(|e| e.y[j]).collect();
                    if y.iter().all(|&v| v == y[0]) {
                        continue;
                    }
                    let s: Vec<f64> = probs.iter().map(|p| p[j]).collect();
                    sum += auroc(&s, &y)?;
                    live += 1;
                }
                sum / live as f64
            }
        })
    }

    fn checkpoint(&self, epoch: usize, valid_score: f64) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                format_version: CHECKPOINT_FORMAT_VERSION,
                model: self.kind,
                epoch,
                valid_score,
                valid_metric_name: self.metric_name().to_string(),
                config_digest: self.config.digest(),
                input_dim: self.dims.input_dim,
                max_visits: self.dims.max_visits,
                output_dim: self.dims.output_dim,
                hidden_dim: self.config.hidden_dim,
            },
            params: self
                .network
                .named_parameters()
                .into_iter()
                .map(|(name, p)| ParamRecord {
                    name,
                    shape: p.value.shape().to_vec(),
                    values: p.value.data().to_vec(),
                })
                .collect(),
        }
    }

    fn restore(&mut self, ckpt: &Checkpoint, path: &Path) -> Result<()> {
        let h = &ckpt.header;
        let schema = |msg: String| {
            Error::Validation(ValidationError::schema(
                "checkpoint",
                format!("checkpoint {} does not match this model: {msg}", path.display()),
                path.display(),
            ))
        };
        if h.model != self.kind
            || h.input_dim != self.dims.input_dim
            || h.max_visits != self.dims.max_visits
            || h.output_dim != self.dims.output_dim
            || h.hidden_dim != self.config.hidden_dim
        {
            return Err(schema(format!(
                "{} V={} T={} C={} hidden={}",
                h.model, h.input_dim, h.max_visits, h.output_dim, h.hidden_dim
            )));
        }
        if h.config_digest != self.config.digest() {
            log::warn!("{} was written with a different training config", path.display());
        }
        let expected: Vec<(String, Vec<usize>)> = self
            .network
            .named_parameters()
            .into_iter()
            .map(|(n, p)| (n, p.value.shape().to_vec()))
            .collect();
        let found: Vec<(String, Vec<usize>)> = ckpt.params.iter().map(|r| (r.name.clone(), r.shape.clone())).collect();
        if expected != found {
            return Err(schema(format!("parameter records {found:?}, expected {expected:?}")));
        }
        for (p, r) in self.network.parameters_mut().into_iter().zip(&ckpt.params) {
            p.value.data_mut().copy_from_slice(&r.values);
            p.zero_grad();
        }
        Ok(())
    }
}

enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

impl Predictor for NeuralPredictor {
    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn fit_observed(
        &mut self,
        train: &[LabeledExample],
        valid: &[LabeledExample],
        observer: &mut dyn FnMut(&EpochRecord),
    ) -> Result<FitSummary> {
        self.config.validate()?;
        self.check_examples("train", train)?;
        self.check_examples("valid", valid)?;
        if self.config.selection_metric == SelectionMetric::Auroc
            && (0..self.dims.output_dim).all(|j| valid.iter().all(|e| e.y[j] == valid[0].y[j]))
        {
            return Err(Error::DegenerateLabels(
                "auroc selection needs both classes in the validation split".into(),
            ));
        }
        clear_checkpoints(&self.checkpoint_dir)?;
        self.ready = false;
        self.results = None;
        self.selected_epoch = None;

        let mut rng = SplitMix64::new(self.config.seed);
        self.network = Network::new(
            self.kind,
            self.dims.input_dim,
            self.config.hidden_dim,
            self.dims.output_dim,
            &mut rng,
        );
        let mut optimizer = match self.config.optimizer {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(self.config.learning_rate)),
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(self.config.learning_rate)),
        };
        let head = self.head();
        let train_inputs: Vec<SeqInput> = train.iter().map(|e| to_input(&e.x)).collect();
        let valid_inputs: Vec<SeqInput> = valid.iter().map(|e| to_input(&e.x)).collect();
        let mut epochs = Vec::with_capacity(self.config.n_epoch);

        for epoch in 1..=self.config.n_epoch {
            let order = rng.permutation(train.len());
            let mut total = 0.0;
            for batch in order.chunks(self.config.n_batchsize) {
                let inputs: Vec<&SeqInput> = batch.iter().map(|&i| &train_inputs[i]).collect();
                let examples: Vec<&LabeledExample> = batch.iter().map(|&i| &train[i]).collect();
                self.network.zero_grad();
                let loss = self.network.loss_and_backward(&inputs, &targets(&examples), head)?;
                if !loss.is_finite() {
                    return Err(Error::NumericFailure { epoch });
                }
                total += loss * batch.len() as f64;
                let mut params = self.network.parameters_mut();
                clip_grad_norm(&mut params, self.config.max_grad_norm);
                match &mut optimizer {
                    Optimizer::Adam(o) => o.step(&mut params),
                    Optimizer::Sgd(o) => o.step(&mut params),
                }
            }
            if self.network.parameters().iter().any(|p| !p.value.all_finite()) {
                return Err(Error::NumericFailure { epoch });
            }
            let probs = self.probabilities(&valid_inputs)?;
            let valid_score = self.valid_score(&probs, valid)?;
            self.checkpoint(epoch, valid_score)
                .write(&self.checkpoint_dir.join(checkpoint_file_name(epoch)))?;
            let record = EpochRecord {
                epoch,
                train_loss: total / train.len() as f64,
                valid_score,
                valid_metric_name: self.metric_name().to_string(),
            };
            log::info!(
                "{} epoch={} loss={:.6} {}={:.6}",
                self.kind,
                epoch,
                record.train_loss,
                record.valid_metric_name,
                valid_score
            );
            observer(&record);
            epochs.push(record);
        }
        self.ready = true;
        Ok(FitSummary {
            epochs,
            checkpoint_dir: self.checkpoint_dir.clone(),
        })
    }

    fn load_model(&mut self) -> Result<usize> {
        let (epoch, path) = select_checkpoint(&self.checkpoint_dir)?;
        let ckpt = Checkpoint::read(&path)?;
        self.restore(&ckpt, &path)?;
        self.ready = true;
        self.results = None;
        self.selected_epoch = Some(epoch);
        Ok(epoch)
    }

    fn inference(&mut self, test: &[LabeledExample]) -> Result<()> {
        if !self.ready {
            return Err(Error::Protocol("inference called before fit or load_model".into()));
        }
        if test.is_empty() {
            return Err(ValidationError::empty("test", "split has no examples").into());
        }
        let hat_y = self.predict_proba(test)?;
        self.results = Some(ResultsBundle {
            ids: test.iter().map(|e| e.patient_id.clone()).collect(),
            y: test.iter().map(|e| e.y.clone()).collect(),
            hat_y,
        });
        Ok(())
    }

    fn get_results(&self) -> Result<&ResultsBundle> {
        self.results
            .as_ref()
            .ok_or_else(|| Error::Protocol("get_results called before inference".into()))
    }
}
