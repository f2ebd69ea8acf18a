//! Predictors behind one fit / load_model / inference / get_results
//! contract, the checkpointed training loop, and the on-disk formats.

mod checkpoint;
mod config;
mod network;
mod predictor;
mod results;

pub use checkpoint::{
    checkpoint_file_name, clear_checkpoints, list_checkpoints, read_header, select_best, select_checkpoint, Checkpoint,
    CheckpointHeader, ParamRecord, CHECKPOINT_FORMAT_VERSION,
};
pub use config::{ModelKind, OptimizerKind, SelectionMetric, TrainConfig};
pub use network::{check_dims, Network, SeqInput, LSTM_FORGET_BIAS, TCNN_WIDTH};
pub use predictor::{
    make_gru, make_lr, make_lstm, make_predictor, make_tcnn, EpochRecord, FitSummary, ModelDims, NeuralPredictor,
    Predictor,
};
pub use results::ResultsBundle;
