use std::io::Write;
use std::path::{Path, PathBuf};

use healthpipe::evaluate::MetricReport;
use healthpipe::fsutil::{atomic_write, read_to_string};
use healthpipe::models::{make_predictor, ModelDims, NeuralPredictor, Predictor, ResultsBundle, TrainConfig};
use healthpipe::preprocess::{generate_dataset, load_dataset, save_dataset, ExperimentDataset};
use healthpipe::{Error, Result, ValidationError};

use crate::config::{check_token, ExperimentConfig, Layout, ModelSpec};
use crate::demo::{generate, DemoSpec};

/// Exit status and one-line description of a failed command.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub code: String,
    pub message: String,
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let exit_code = match e {
            Error::NumericFailure { .. } => EXIT_NUMERIC,
            Error::Fold { ref source, .. } if matches!(**source, Error::NumericFailure { .. }) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        };
        CliError {
            exit_code,
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        Error::from(e).into()
    }
}

impl CliError {
    /// `error code=<code> message=<message>` on a single line.
    pub fn line(&self) -> String {
        format!(
            "error code={} message={}",
            self.code,
            self.message.replace(['\n', '\r'], " ")
        )
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

pub struct PrepareArgs<'a> {
    pub input: &'a Path,
    pub exp_id: &'a str,
    pub task: &'a str,
    pub n_workers: usize,
    pub preprocess: &'a healthpipe::preprocess::PreprocessConfig,
}

pub fn prepare(layout: &Layout, args: &PrepareArgs, out: &mut dyn Write) -> CliResult<ExperimentDataset> {
    check_token("exp_id", args.exp_id)?;
    let ds = generate_dataset(args.exp_id, args.input, args.task, args.preprocess, args.n_workers)?;
    save_dataset(&ds, &layout.data_dir(args.exp_id))?;
    write_out(
        out,
        &format!(
            "exp_id={} task={} train={} valid={} test={} V={} T={}",
            ds.exp_id,
            ds.task.as_str(),
            ds.train.len(),
            ds.valid.len(),
            ds.test.len(),
            ds.vocab_size(),
            ds.max_visits
        ),
    )?;
    Ok(ds)
}

fn dims(ds: &ExperimentDataset) -> ModelDims {
    ModelDims {
        input_dim: ds.vocab_size(),
        max_visits: ds.max_visits,
        output_dim: ds.label_dim,
    }
}

pub fn train(
    layout: &Layout,
    exp_id: &str,
    expmodel_id: &str,
    spec: &ModelSpec,
    out: &mut dyn Write,
) -> CliResult<NeuralPredictor> {
    check_token("exp_id", exp_id)?;
    check_token("expmodel_id", expmodel_id)?;
    spec.train.validate()?;
    let ds = load_dataset(&layout.data_dir(exp_id))?;
    let dir = layout.checkpoint_dir(exp_id, expmodel_id);
    let mut model = make_predictor(spec.model, dims(&ds), ds.task, spec.train.clone(), &dir)?;
    let mut write_err = None;
    let result = model.fit_observed(&ds.train, &ds.valid, &mut |r| {
        let line = format!("epoch={} loss={:.6} valid={:.6}", r.epoch, r.train_loss, r.valid_score);
        if let Err(e) = write_out(out, &line) {
            write_err.get_or_insert(e);
        }
    });
    result?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let json = serde_json::to_string_pretty(spec).expect("model spec serializes");
    atomic_write(&layout.model_file(exp_id, expmodel_id), json.as_bytes())?;
    Ok(model)
}

pub fn infer(layout: &Layout, exp_id: &str, expmodel_id: &str, out: &mut dyn Write) -> CliResult<ResultsBundle> {
    check_token("exp_id", exp_id)?;
    check_token("expmodel_id", expmodel_id)?;
    let spec_path = layout.model_file(exp_id, expmodel_id);
    if !spec_path.is_file() {
        return Err(Error::NoCheckpoints(layout.checkpoint_dir(exp_id, expmodel_id)).into());
    }
    let spec: ModelSpec = serde_json::from_str(&read_to_string(&spec_path)?)
        .map_err(|e| ValidationError::schema("model", format!("{}: {e}", spec_path.display()), spec_path.display()))?;
    let ds = load_dataset(&layout.data_dir(exp_id))?;
    let dir = layout.checkpoint_dir(exp_id, expmodel_id);
    let mut model = make_predictor(spec.model, dims(&ds), ds.task, spec.train, &dir)?;
    let epoch = model.load_model()?;
    write_out(out, &format!("selected_epoch={epoch}"))?;
    model.inference(&ds.test)?;
    let results = model.get_results()?.clone();
    results.write(&layout.results_file(exp_id, expmodel_id))?;
    Ok(results)
}

/// Prints the report as JSON on `out` and six-decimal summary lines on `err`.
pub fn evaluate(results: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<MetricReport> {
    let report = ResultsBundle::read(results)?.evaluate()?;
    write_out(out, &report.to_json())?;
    for line in report.summary_lines() {
        write_out(err, &line)?;
    }
    Ok(report)
}

/// Full pipeline from one config. Everything is validated before any
/// artifact is written; later failures leave earlier stages on disk.
pub fn run(
    layout: &Layout,
    config: &ExperimentConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<MetricReport> {
    config.validate()?;
    let input = config
        .input
        .as_deref()
        .ok_or_else(|| ValidationError::schema("input", "config has no input file", ""))?;
    if !input.is_file() {
        return Err(
            ValidationError::schema("input", format!("cannot read {}", input.display()), input.display()).into(),
        );
    }
    let (exp, mid) = (config.exp_id.as_str(), config.expmodel_id.as_str());
    prepare(
        layout,
        &PrepareArgs {
            input,
            exp_id: exp,
            task: &config.task,
            n_workers: config.n_workers,
            preprocess: &config.preprocess,
        },
        err,
    )?;
    let spec = ModelSpec {
        model: config.model,
        train: config.train.clone(),
    };
    train(layout, exp, mid, &spec, err)?;
    let results = infer(layout, exp, mid, err)?;
    let report = results.evaluate()?;
    atomic_write(&layout.report_file(exp, mid), report.to_json().as_bytes())?;
    write_out(out, &report.to_json())?;
    Ok(report)
}

pub fn demo_data(spec: &DemoSpec, output: Option<&PathBuf>, out: &mut dyn Write) -> CliResult {
    let (bytes, _) = generate(spec)?;
    match output {
        Some(path) => atomic_write(path, &bytes)?,
        None => out.write_all(&bytes).map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(())
}

/// Train config from defaults, then the config file, then explicit flags.
pub fn merge_train(base: &TrainConfig, overrides: &TrainOverrides) -> TrainConfig {
    let mut c = base.clone();
    if let Some(v) = overrides.n_epoch {
        c.n_epoch = v;
    }
    if let Some(v) = overrides.n_batchsize {
        c.n_batchsize = v;
    }
    if let Some(v) = overrides.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = overrides.optimizer {
        c.optimizer = v;
    }
    if let Some(v) = overrides.seed {
        c.seed = v;
    }
    if let Some(v) = overrides.hidden_dim {
        c.hidden_dim = v;
    }
    if let Some(v) = overrides.max_grad_norm {
        c.max_grad_norm = v;
    }
    if let Some(v) = overrides.selection_metric {
        c.selection_metric = v;
    }
    if overrides.use_gpu {
        c.use_gpu = true;
    }
    c
}

#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub n_epoch: Option<usize>,
    pub n_batchsize: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<healthpipe::models::OptimizerKind>,
    pub seed: Option<u64>,
    pub hidden_dim: Option<usize>,
    pub max_grad_norm: Option<f64>,
    pub selection_metric: Option<healthpipe::models::SelectionMetric>,
    pub use_gpu: bool,
}
