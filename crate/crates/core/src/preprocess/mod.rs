//! Clinical event preprocessing: CSV events to split, tensorized task datasets.

mod dataset;
mod events;
mod patients;
mod split;
mod tasks;
mod tensorize;
mod vocab;

pub use dataset::{
    generate_dataset, generate_dataset_from_bytes, label_patients, load_dataset, save_dataset, sha256_hex,
    ExperimentDataset, PreprocessConfig, Provenance, DATASET_FORMAT_VERSION,
};
pub use events::{parse_events, RawEvent, DEATH_EVENT, EVENT_HEADER};
pub use patients::{build_patients, PatientRecord, Visit};
pub use split::{kfold, kfold_indices, split, split_indices, Fold, Split, SplitSpec};
pub use tasks::{
    make_mortality_task, make_phenotyping_task, make_task, mortality_example, phenotype_example, LabeledExample,
    TaskSpec, TASK_NAMES,
};
pub use tensorize::{tensorize, EpisodeTensor};
pub use vocab::{build_vocabulary, Vocabulary, UNK};
