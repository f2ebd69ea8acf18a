//! Predictive-health modeling pipeline.
//!
//! The crate is organized the way an experiment flows:
//!
//! * [`preprocess`] turns a CSV stream of clinical events into per-patient
//!   visit sequences, builds a code vocabulary, labels a task (mortality or
//!   phenotyping), tensorizes and splits the result into an
//!   [`ExperimentDataset`](preprocess::ExperimentDataset) that can be saved
//!   to and loaded from disk.
//! * [`models`] holds the [`Predictor`](models::Predictor) contract
//!   (`fit` / `load_model` / `inference` / `get_results`) and four concrete
//!   models (logistic regression, GRU, LSTM and a temporal CNN) trained with
//!   per-epoch checkpoints and best-validation selection.
//! * [`evaluate`] infers the task kind from a label matrix and computes the
//!   metric set for that kind, plus k-fold cross-validation.
//!
//! [`nn`] is the small numerical core the models are built from, and
//! [`common`] carries the shared vocabulary types and parameter checks.

pub mod common;
pub mod error;
pub mod evaluate;
pub mod fsutil;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod rng;

pub use common::{
    check_count, check_parameter, partition_tasks, Bound, DataKind, ErrorCode, TaskKind, ValidationError,
};
pub use error::{Error, Result};
pub use rng::SplitMix64;
