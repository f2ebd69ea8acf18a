//! `healthpipe` command-line interface: prepare, train, infer, evaluate,
//! run (all four in sequence) and demo-data.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 non-finite loss
//! during training. Errors are reported on stderr as one
//! `error code=<code> message=<text>` line.

pub mod commands;
pub mod config;
pub mod demo;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use healthpipe::models::{ModelKind, OptimizerKind, SelectionMetric};
use healthpipe::preprocess::SplitSpec;

use commands::{CliResult, PrepareArgs, TrainOverrides};
use config::{ExperimentConfig, Layout, ModelSpec};
use demo::DemoSpec;

#[derive(Debug, Parser)]
#[command(name = "healthpipe", version, about = "Clinical event stream to evaluated predictor")]
pub struct Cli {
    /// Artifact root (default: $HEALTHPIPE_HOME, else ./experiments)
    #[arg(long, global = true)]
    pub home: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and save a task dataset from an event CSV
    Prepare(PrepareCmd),
    /// Train a model on a prepared dataset, writing one checkpoint per epoch
    Train(TrainCmd),
    /// Load the best checkpoint and predict the test split
    Infer(InferCmd),
    /// Print the metric report for a results file
    Evaluate(EvaluateCmd),
    /// prepare, train, infer and evaluate from one config file
    Run(RunCmd),
    /// Write a synthetic event CSV
    DemoData(DemoCmd),
}

#[derive(Debug, Args)]
pub struct PrepareCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub exp_id: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Split shuffle seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train,valid,test ratios, e.g. 0.7,0.1,0.2
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub max_visits: Option<usize>,
    #[arg(long)]
    pub visit_gap_hours: Option<f64>,
    #[arg(long)]
    pub horizon_days: Option<f64>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Experiment config supplying defaults for unset flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.message)
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Initialization and shuffling seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    #[arg(long, value_enum)]
    pub selection_metric: Option<SelectionArg>,
    /// Accepted and ignored (CPU only)
    #[arg(long)]
    pub use_gpu: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SelectionArg {
    TaskDefault,
    Auroc,
}

impl TrainFlags {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            n_epoch: self.epochs,
            n_batchsize: self.batch_size,
            learning_rate: self.lr,
            optimizer: self.optimizer.map(|o| match o {
                OptimizerArg::Adam => OptimizerKind::Adam,
                OptimizerArg::Sgd => OptimizerKind::Sgd,
            }),
            seed: self.seed,
            hidden_dim: self.hidden_dim,
            max_grad_norm: self.max_grad_norm,
            selection_metric: self.selection_metric.map(|s| match s {
                SelectionArg::TaskDefault => SelectionMetric::TaskDefault,
                SelectionArg::Auroc => SelectionMetric::Auroc,
            }),
            use_gpu: self.use_gpu,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[arg(long)]
    pub exp_id: Option<String>,
    /// One of lr, gru, lstm, tcnn
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub expmodel_id: Option<String>,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferCmd {
    #[arg(long)]
    pub exp_id: Option<String>,
    #[arg(long)]
    pub expmodel_id: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    #[arg(long)]
    pub results: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    pub config: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct DemoCmd {
    #[arg(long, default_value_t = 2000)]
    pub patients: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_rate: f64,
    /// Output file (default: stdout)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn base_config(path: Option<&PathBuf>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let layout = Layout::resolve(cli.home.as_deref());
    match cli.command {
        Command::Prepare(cmd) => {
            let mut cfg = base_config(cmd.config.as_ref())?;
            let p = &mut cfg.preprocess;
            if let Some(v) = cmd.max_visits {
                p.max_visits = v;
            }
            if let Some(v) = cmd.visit_gap_hours {
                p.visit_gap_hours = v;
            }
            if let Some(v) = cmd.horizon_days {
                p.horizon_days = v;
            }
            if let Some(v) = cmd.min_count {
                p.min_count = v;
            }
            if let Some(r) = &cmd.ratios {
                p.split = SplitSpec {
                    ratios: [r[0], r[1], r[2]],
                    seed: p.split.seed,
                };
            }
            if let Some(s) = cmd.seed {
                p.split.seed = s;
            }
            let exp_id = cmd.exp_id.unwrap_or(cfg.exp_id);
            let task = cmd.task.unwrap_or(cfg.task);
            commands::prepare(
                &layout,
                &PrepareArgs {
                    input: &cmd.input,
                    exp_id: &exp_id,
                    task: &task,
                    n_workers: cmd.workers.unwrap_or(cfg.n_workers),
                    preprocess: &cfg.preprocess,
                },
                out,
            )?;
        }
        Command::Train(cmd) => {
            let cfg = base_config(cmd.config.as_ref())?;
            let spec = ModelSpec {
                model: cmd.model.unwrap_or(cfg.model),
                train: commands::merge_train(&cfg.train, &cmd.flags.overrides()),
            };
            let exp_id = cmd.exp_id.unwrap_or(cfg.exp_id);
            let mid = cmd.expmodel_id.unwrap_or(cfg.expmodel_id);
            commands::train(&layout, &exp_id, &mid, &spec, out)?;
        }
        Command::Infer(cmd) => {
            let cfg = base_config(cmd.config.as_ref())?;
            let exp_id = cmd.exp_id.unwrap_or(cfg.exp_id);
            let mid = cmd.expmodel_id.unwrap_or(cfg.expmodel_id);
            commands::infer(&layout, &exp_id, &mid, out)?;
        }
        Command::Evaluate(cmd) => {
            commands::evaluate(&cmd.results, out, err)?;
        }
        Command::Run(cmd) => {
            let mut cfg = ExperimentConfig::load(&cmd.config)?;
            cfg.train = commands::merge_train(&cfg.train, &cmd.flags.overrides());
            commands::run(&layout, &cfg, out, err)?;
        }
        Command::DemoData(cmd) => {
            let spec = DemoSpec {
                noise_rate: cmd.noise_rate,
                ..DemoSpec::new(cmd.patients, cmd.seed)
            };
            commands::demo_data(&spec, cmd.output.as_ref(), out)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.exit_code
        }
    }
}
