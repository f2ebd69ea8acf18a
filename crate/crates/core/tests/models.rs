use std::fs;
use std::path::Path;

use healthpipe::models::{
    checkpoint_file_name, list_checkpoints, make_gru, make_lr, make_predictor, make_tcnn, Checkpoint, ModelDims,
    ModelKind, Predictor, ResultsBundle, TrainConfig,
};
use healthpipe::preprocess::{EpisodeTensor, LabeledExample};
use healthpipe::{Error, SplitMix64, TaskKind};

const V: usize = 6;
const T: usize = 4;

/// Label 1 iff code 0 appears in the last real visit.
fn separable(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|i| {
            let len = 1 + rng.below(T as u64) as usize;
            let positive = rng.bernoulli(0.5);
            let mut rows = vec![vec![0u8; V]; T];
            for row in rows.iter_mut().take(len) {
                for v in row.iter_mut().skip(1) {
                    *v = rng.bernoulli(0.4) as u8;
                }
            }
            rows[len - 1][0] = positive as u8;
            let mask: Vec<u8> = (0..T).map(|t| (t < len) as u8).collect();
            LabeledExample {
                patient_id: format!("p{i:04}"),
                x: EpisodeTensor::from_rows(&rows, &mask).unwrap(),
                y: vec![positive as u8],
            }
        })
        .collect()
}

fn dims() -> ModelDims {
    ModelDims {
        input_dim: V,
        max_visits: T,
        output_dim: 1,
    }
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        n_epoch: epochs,
        hidden_dim: 8,
        learning_rate: 0.01,
        ..Default::default()
    }
}

fn rewrite_scores(dir: &Path, scores: &[f64]) {
    for (i, &s) in scores.iter().enumerate() {
        let path = dir.join(checkpoint_file_name(i + 1));
        let mut c = Checkpoint::read(&path).unwrap();
        c.header.valid_score = s;
        c.write(&path).unwrap();
    }
}

#[test]
fn one_checkpoint_per_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(60, 1);
    let mut m = make_gru(dims(), TaskKind::BinaryClassification, config(3), tmp.path()).unwrap();
    let summary = m.fit(&data[..40], &data[40..]).unwrap();
    assert_eq!(summary.epochs.len(), 3);
    let epochs: Vec<usize> = list_checkpoints(tmp.path())
        .unwrap()
        .into_iter()
        .map(|(e, _)| e)
        .collect();
    assert_eq!(epochs, [1, 2, 3]);
}

#[test]
fn refit_clears_stale_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(40, 2);
    let mut m = make_lr(dims(), TaskKind::BinaryClassification, config(4), tmp.path()).unwrap();
    m.fit(&data[..30], &data[30..]).unwrap();
    let mut m = make_lr(dims(), TaskKind::BinaryClassification, config(2), tmp.path()).unwrap();
    m.fit(&data[..30], &data[30..]).unwrap();
    assert_eq!(list_checkpoints(tmp.path()).unwrap().len(), 2);
}

#[test]
fn training_reduces_loss() {
    for kind in ModelKind::ALL {
        let tmp = tempfile::tempdir().unwrap();
        let data = separable(120, 3);
        let mut m = make_predictor(kind, dims(), TaskKind::BinaryClassification, config(15), tmp.path()).unwrap();
        let s = m.fit(&data[..100], &data[100..]).unwrap();
        let (first, last) = (s.epochs[0].train_loss, s.epochs.last().unwrap().train_loss);
        assert!(last < first, "{kind}: {first} -> {last}");
    }
}

#[test]
fn load_model_selects_best_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(40, 4);
    let mut m = make_lr(dims(), TaskKind::BinaryClassification, config(3), tmp.path()).unwrap();
    m.fit(&data[..30], &data[30..]).unwrap();
    for (scores, expected) in [([0.6, 0.9, 0.7], 2), ([0.8, 0.8, 0.8], 1), ([0.1, 0.2, 0.3], 3)] {
        rewrite_scores(tmp.path(), &scores);
        assert_eq!(m.load_model().unwrap(), expected, "{scores:?}");
        assert_eq!(m.selected_epoch(), Some(expected));
    }
}

#[test]
fn loaded_parameters_match_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(40, 5);
    let mut m = make_gru(dims(), TaskKind::BinaryClassification, config(3), tmp.path()).unwrap();
    m.fit(&data[..30], &data[30..]).unwrap();
    rewrite_scores(tmp.path(), &[0.2, 0.9, 0.1]);
    m.load_model().unwrap();
    m.inference(&data[30..]).unwrap();
    let a = m.get_results().unwrap().clone();

    let mut fresh = make_gru(dims(), TaskKind::BinaryClassification, config(3), tmp.path()).unwrap();
    assert_eq!(fresh.load_model().unwrap(), 2);
    fresh.inference(&data[30..]).unwrap();
    assert_eq!(fresh.get_results().unwrap(), &a);
}

#[test]
fn protocol_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(10, 6);
    let mut m = make_lr(dims(), TaskKind::BinaryClassification, config(1), tmp.path()).unwrap();
    assert!(matches!(m.inference(&data), Err(Error::Protocol(_))));
    assert!(matches!(m.get_results(), Err(Error::Protocol(_))));
    assert!(matches!(m.load_model(), Err(Error::NoCheckpoints(_))));
    m.fit(&data[..8], &data[8..]).unwrap();
    assert!(matches!(m.get_results(), Err(Error::Protocol(_))));
    m.inference(&data[8..]).unwrap();
    assert_eq!(m.get_results().unwrap().len(), 2);
}

#[test]
fn inference_is_repeatable_and_shape_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(30, 7);
    let mut m = make_tcnn(dims(), TaskKind::BinaryClassification, config(2), tmp.path()).unwrap();
    m.fit(&data[..20], &data[20..]).unwrap();
    m.inference(&data[20..]).unwrap();
    let first = m.get_results().unwrap().clone();
    m.inference(&data[20..]).unwrap();
    assert_eq!(m.get_results().unwrap(), &first);
    assert_eq!(first.hat_y.len(), 10);

    let wide = LabeledExample {
        patient_id: "x".into(),
        x: EpisodeTensor::from_rows(&vec![vec![0u8; V + 1]; T], &[1, 0, 0, 0]).unwrap(),
        y: vec![0],
    };
    assert!(matches!(m.inference(&[wide]), Err(Error::Shape(_))));
}

#[test]
fn identical_runs_write_identical_checkpoints() {
    let data = separable(50, 8);
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().unwrap();
        let mut m = make_gru(dims(), TaskKind::BinaryClassification, config(2), tmp.path()).unwrap();
        m.fit(&data[..40], &data[40..]).unwrap();
        let files: Vec<Vec<u8>> = list_checkpoints(tmp.path())
            .unwrap()
            .into_iter()
            .map(|(_, p)| fs::read(p).unwrap())
            .collect();
        bytes.push(files);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn fit_validates_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(10, 9);
    let mut m = make_lr(dims(), TaskKind::BinaryClassification, config(1), tmp.path()).unwrap();
    assert_eq!(m.fit(&data, &[]).unwrap_err().code(), "EmptyInput");
    let mut bad = data.clone();
    bad[0].y = vec![1, 0];
    assert_eq!(m.fit(&bad, &data).unwrap_err().code(), "SchemaViolation");
    assert!(list_checkpoints(tmp.path()).unwrap().is_empty());

    let short = ModelDims {
        max_visits: 2,
        ..dims()
    };
    assert_eq!(
        make_tcnn(short, TaskKind::BinaryClassification, config(1), tmp.path())
            .unwrap_err()
            .code(),
        "RangeViolation"
    );
    let zero_epochs = TrainConfig {
        n_epoch: 0,
        ..config(1)
    };
    assert!(make_lr(dims(), TaskKind::BinaryClassification, zero_epochs, tmp.path()).is_err());
}

#[test]
fn multiclass_rows_sum_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut data = separable(40, 10);
    for e in &mut data {
        e.y = if e.y[0] == 1 { vec![0, 1, 0] } else { vec![1, 0, 0] };
    }
    let d = ModelDims {
        output_dim: 3,
        ..dims()
    };
    let mut m = make_gru(d, TaskKind::MultiClass, config(2), tmp.path()).unwrap();
    m.fit(&data[..30], &data[30..]).unwrap();
    m.inference(&data[30..]).unwrap();
    for row in &m.get_results().unwrap().hat_y {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn results_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = separable(30, 11);
    let mut m = make_lr(
        dims(),
        TaskKind::BinaryClassification,
        config(2),
        tmp.path().join("ckpt"),
    )
    .unwrap();
    m.fit(&data[..20], &data[20..]).unwrap();
    m.inference(&data[20..]).unwrap();
    let path = tmp.path().join("results.jsonl");
    m.get_results().unwrap().write(&path).unwrap();
    assert_eq!(&ResultsBundle::read(&path).unwrap(), m.get_results().unwrap());
}
