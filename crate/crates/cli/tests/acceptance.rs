//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one `criterion N: PASS|FAIL <detail>` line, then exits
//! non-zero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use healthpipe::evaluate::{auprc, auroc, label_check, LabelMatrix};
use healthpipe::models::{
    checkpoint_file_name, make_gru, make_lr, make_lstm, select_best, Checkpoint, ModelDims, Predictor, TrainConfig,
};
use healthpipe::nn::{check_layer, CheckTarget};
use healthpipe::preprocess::{
    generate_dataset_from_bytes, kfold_indices, save_dataset, split_indices, ExperimentDataset, PreprocessConfig,
    SplitSpec,
};
use healthpipe::{SplitMix64, TaskKind};
use healthpipe_cli::commands;
use healthpipe_cli::config::{ExperimentConfig, Layout};
use healthpipe_cli::demo::{generate, DemoSpec};

type Outcome = Result<String, String>;

fn main() {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, metric_oracles),
        (2, gradient_checks),
        (3, end_to_end_learning),
        (4, checkpoint_selection),
        (5, parallel_determinism),
        (6, split_properties),
        (7, task_inference),
        (8, run_determinism),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {detail} ({secs:.2}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))
}

/// P(score of a random positive > random negative), ties count one half.
fn pairwise_auroc(s: &[f64], y: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Average precision with tied scores ranked in input order.
fn enumerated_ap(s: &[f64], y: &[u8]) -> f64 {
    let ahead = |i: usize, j: usize| s[j] > s[i] || (s[j] == s[i] && j <= i);
    let positives: Vec<usize> = (0..s.len()).filter(|&i| y[i] == 1).collect();
    let total: f64 = positives
        .iter()
        .map(|&i| {
            let rank = (0..s.len()).filter(|&j| ahead(i, j)).count();
            let hits = positives.iter().filter(|&&j| ahead(i, j)).count();
            hits as f64 / rank as f64
        })
        .sum();
    total / positives.len() as f64
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let n = 2 + rng.below(49) as usize;
        // few distinct levels force ties
        let levels = 1 + rng.below(n as u64) as usize;
        let mut s: Vec<f64> = (0..n)
            .map(|_| rng.below(levels as u64) as f64 / levels as f64)
            .collect();
        if rng.bernoulli(0.5) {
            for v in &mut s {
                if rng.bernoulli(0.5) {
                    *v = rng.next_f64();
                }
            }
        }
        let mut y: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.4) as u8).collect();
        y[0] = 1;
        y[1] = 0;
        rng.shuffle(&mut y);
        let a = auroc(&s, &y).map_err(|e| format!("case {case}: {e}"))?;
        let p = auprc(&s, &y).map_err(|e| format!("case {case}: {e}"))?;
        let (da, dp) = ((a - pairwise_auroc(&s, &y)).abs(), (p - enumerated_ap(&s, &y)).abs());
        worst = worst.max(da).max(dp);
        ensure(da <= 1e-12 && dp <= 1e-12, || {
            format!("case {case}: auroc delta {da:e}, auprc delta {dp:e}")
        })?;
    }
    within(start, Duration::from_secs(5), "500 instances")?;
    Ok(format!("500 instances, max |delta| {worst:e}"))
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for target in CheckTarget::ALL {
        for seed in 0..20 {
            let g = check_layer(target, seed, 0.0);
            worst = worst.max(g.max_rel_error);
            ensure(g.passes(1e-4), || {
                format!("{} seed {seed}: {:e}", target.name(), g.max_rel_error)
            })?;
        }
        let corrupted = check_layer(target, 0, 0.1);
        ensure(!corrupted.passes(1e-4), || {
            format!("{}: corrupted gradient passed", target.name())
        })?;
    }
    within(start, Duration::from_secs(60), "gradient checks")?;
    Ok(format!(
        "6 targets x 20 seeds, max rel error {worst:e}, corrupted controls rejected"
    ))
}

fn demo_dataset(patients: usize, workers: usize) -> ExperimentDataset {
    let (csv, _) = generate(&DemoSpec::new(patients, 7)).expect("demo data");
    generate_dataset_from_bytes("acceptance", &csv, "mortality", &PreprocessConfig::default(), workers)
        .expect("dataset")
}

fn end_to_end_learning() -> Outcome {
    let start = Instant::now();
    let ds = demo_dataset(2000, 1);
    let dims = ModelDims {
        input_dim: ds.vocab_size(),
        max_visits: ds.max_visits,
        output_dim: ds.label_dim,
    };
    let config = TrainConfig {
        n_epoch: 30,
        learning_rate: 0.005,
        ..Default::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let task = TaskKind::BinaryClassification;
    let models: Vec<(&str, f64, Box<dyn Predictor>)> = vec![
        (
            "gru",
            0.95,
            Box::new(make_gru(dims, task, config.clone(), tmp.path().join("gru")).map_err(|e| e.to_string())?),
        ),
        (
            "lstm",
            0.95,
            Box::new(make_lstm(dims, task, config.clone(), tmp.path().join("lstm")).map_err(|e| e.to_string())?),
        ),
        (
            "lr",
            0.90,
            Box::new(make_lr(dims, task, config.clone(), tmp.path().join("lr")).map_err(|e| e.to_string())?),
        ),
    ];
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (name, bar, mut model) in models {
        model.fit(&ds.train, &ds.valid).map_err(|e| format!("{name}: {e}"))?;
        model.load_model().map_err(|e| format!("{name}: {e}"))?;
        model.inference(&ds.test).map_err(|e| format!("{name}: {e}"))?;
        let r = model.get_results().map_err(|e| e.to_string())?;
        let score = auroc(
            &r.hat_y.iter().map(|h| h[0]).collect::<Vec<_>>(),
            &r.y.iter().map(|y| y[0]).collect::<Vec<_>>(),
        )
        .map_err(|e| e.to_string())?;
        parts.push(format!("{name} auroc={score:.4}"));
        if score < bar {
            failures.push(format!("{name} auroc {score:.4} < {bar}"));
        }
    }
    if !failures.is_empty() {
        return Err(failures.join(", "));
    }
    within(start, Duration::from_secs(300), "training")?;
    Ok(format!("test n={} {}", ds.test.len(), parts.join(" ")))
}

type Rescaling = (&'static str, fn(f64) -> f64);

fn checkpoint_selection() -> Outcome {
    let ds = demo_dataset(200, 1);
    let dims = ModelDims {
        input_dim: ds.vocab_size(),
        max_visits: ds.max_visits,
        output_dim: ds.label_dim,
    };
    let config = TrainConfig {
        n_epoch: 3,
        hidden_dim: 8,
        ..Default::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut model = make_lr(dims, TaskKind::BinaryClassification, config, tmp.path()).map_err(|e| e.to_string())?;
    model.fit(&ds.train, &ds.valid).map_err(|e| e.to_string())?;
    let rescalings: [Rescaling; 4] = [
        ("identity", |s| s),
        // stored scores must stay in [0, 1]
        ("affine", |s| 0.1 + 0.5 * s),
        ("cubic", |s| s * s * s),
        ("sqrt", |s| s.sqrt()),
    ];
    for (scores, expected) in [([0.6, 0.9, 0.7], 2), ([0.8, 0.8, 0.8], 1)] {
        for (name, f) in rescalings {
            let injected: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
            for (i, &s) in injected.iter().enumerate() {
                let path = tmp.path().join(checkpoint_file_name(i + 1));
                let mut c = Checkpoint::read(&path).map_err(|e| e.to_string())?;
                c.header.valid_score = s;
                c.write(&path).map_err(|e| e.to_string())?;
            }
            let got = model.load_model().map_err(|e| e.to_string())?;
            ensure(got == expected, || {
                format!("{scores:?} under {name}: selected epoch {got}, want {expected}")
            })?;
        }
    }
    let mut rng = SplitMix64::new(5);
    for case in 0..200 {
        let scores: Vec<f64> = (0..1 + rng.below(20)).map(|_| (rng.below(6) as f64) / 5.0).collect();
        let base = select_best(&scores);
        let scaled: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() - 4.0).collect();
        ensure(select_best(&scaled) == base, || {
            format!("random case {case}: rescaling changed the selection")
        })?;
    }
    Ok("[0.6,0.9,0.7] -> 2, [0.8,0.8,0.8] -> 1 under 4 rescalings; 200 random sequences invariant".into())
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("under root").to_path_buf();
                out.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

fn parallel_determinism() -> Outcome {
    let (csv, _) = generate(&DemoSpec::new(10_000, 11)).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference = None;
    let mut times = Vec::new();
    for workers in [1, 2, 4, 8] {
        let start = Instant::now();
        let ds = generate_dataset_from_bytes("parallel", &csv, "mortality", &PreprocessConfig::default(), workers)
            .map_err(|e| e.to_string())?;
        times.push((workers, start.elapsed().as_secs_f64()));
        let dir = tmp.path().join(format!("w{workers}"));
        save_dataset(&ds, &dir).map_err(|e| e.to_string())?;
        let files = dir_bytes(&dir);
        match &reference {
            None => reference = Some(files),
            Some(r) => ensure(r == &files, || {
                format!("workers={workers} artifacts differ from workers=1")
            })?,
        }
    }
    let ratio = times[2].1 / times[0].1;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let speed = if cores >= 4 && ratio > 0.6 {
        format!("4-worker/1-worker time {ratio:.2} exceeds 0.6 on {cores} cores (informational)")
    } else {
        format!("4-worker/1-worker time {ratio:.2} on {cores} core(s) (informational)")
    };
    Ok(format!("workers 1,2,4,8 byte-identical; {speed}"))
}

fn split_properties() -> Outcome {
    let mut rng = SplitMix64::new(77);
    for case in 0..1000 {
        let n = 3 + rng.below(400) as usize;
        // percentages keep the floor rule exact in integer arithmetic
        let p0 = 1 + rng.below(98);
        let p1 = rng.below(100 - p0);
        let p2 = 100 - p0 - p1;
        let spec = SplitSpec::new(p0 as f64 / 100.0, p1 as f64 / 100.0, p2 as f64 / 100.0, rng.next_u64())
            .map_err(|e| format!("case {case}: {e}"))?;
        let s = split_indices(n, &spec).map_err(|e| format!("case {case}: {e}"))?;
        let want_train = n * p0 as usize / 100;
        let want_valid = n * (p0 + p1) as usize / 100 - want_train;
        ensure(s.train.len() == want_train && s.valid.len() == want_valid, || {
            format!(
                "split case {case}: n={n} ratios={p0}/{p1}/{p2} sizes {}/{}/{}",
                s.train.len(),
                s.valid.len(),
                s.test.len()
            )
        })?;
        let mut all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
        all.sort_unstable();
        ensure(all == (0..n).collect::<Vec<_>>(), || {
            format!("split case {case}: not a disjoint cover")
        })?;
    }
    for case in 0..1000 {
        let n = 2 + rng.below(400) as usize;
        let k = 2 + rng.below(n.min(20) as u64 - 1) as usize;
        let folds = kfold_indices(n, k, rng.next_u64()).map_err(|e| format!("kfold case {case}: {e}"))?;
        ensure(folds.len() == k, || {
            format!("kfold case {case}: {} folds, want {k}", folds.len())
        })?;
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.iter().copied()).collect();
        all.sort_unstable();
        ensure(all == (0..n).collect::<Vec<_>>(), || {
            format!("kfold case {case}: test folds do not partition")
        })?;
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        ensure(spread <= 1, || format!("kfold case {case}: sizes {sizes:?}"))?;
        for f in &folds {
            let mut both: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            both.sort_unstable();
            ensure(both == (0..n).collect::<Vec<_>>(), || {
                format!("kfold case {case}: train is not the complement")
            })?;
        }
    }
    Ok("1000 split and 1000 kfold instances".into())
}

fn kind_oracle(rows: &[Vec<u8>]) -> TaskKind {
    if rows[0].len() == 1 {
        TaskKind::BinaryClassification
    } else if rows.iter().all(|r| r.iter().map(|&v| v as usize).sum::<usize>() == 1) {
        TaskKind::MultiClass
    } else {
        TaskKind::MultiLabel
    }
}

fn infer(rows: &[Vec<u8>]) -> Result<TaskKind, String> {
    Ok(label_check(&LabelMatrix::from_rows(rows).map_err(|e| e.to_string())?))
}

fn task_inference() -> Outcome {
    use TaskKind::*;
    let canonical: [(Vec<Vec<u8>>, TaskKind); 9] = [
        (vec![vec![0], vec![1], vec![1]], BinaryClassification),
        (vec![vec![0], vec![0]], BinaryClassification),
        (vec![vec![1]], BinaryClassification),
        (vec![vec![1, 0, 0], vec![0, 0, 1]], MultiClass),
        (vec![vec![0, 1], vec![1, 0], vec![0, 1]], MultiClass),
        (vec![vec![0, 0, 0, 1]], MultiClass),
        (vec![vec![1, 1, 0], vec![0, 0, 0]], MultiLabel),
        (vec![vec![0, 0], vec![1, 0]], MultiLabel),
        (vec![vec![1, 1], vec![1, 1]], MultiLabel),
    ];
    for (i, (rows, want)) in canonical.iter().enumerate() {
        let got = infer(rows)?;
        ensure(got == *want, || format!("canonical case {i}: {got:?}, want {want:?}"))?;
    }
    let mut rng = SplitMix64::new(31);
    for case in 0..100 {
        let n = 1 + rng.below(30) as usize;
        let d = 2 + rng.below(8) as usize;
        let one_hot = case % 2 == 0;
        let mut rows: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                if one_hot {
                    let mut r = vec![0u8; d];
                    r[rng.below(d as u64) as usize] = 1;
                    r
                } else {
                    (0..d).map(|_| rng.bernoulli(0.5) as u8).collect()
                }
            })
            .collect();
        if !one_hot {
            // guarantee at least one row that is not one-hot
            let i = rng.below(n as u64) as usize;
            rows[i] = vec![1; d];
        }
        let want = kind_oracle(&rows);
        ensure(want == if one_hot { MultiClass } else { MultiLabel }, || {
            format!("case {case}: generator bug")
        })?;
        let got = infer(&rows)?;
        ensure(got == want, || format!("random case {case}: {got:?}, want {want:?}"))?;
        rng.shuffle(&mut rows);
        let permuted = infer(&rows)?;
        ensure(permuted == got, || {
            format!("random case {case}: row permutation changed {got:?} to {permuted:?}")
        })?;
    }
    Ok("9 canonical + 100 random matrices, row-permutation invariant".into())
}

fn run_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = tmp.path().join("events.csv");
    let (bytes, _) = generate(&DemoSpec::new(300, 3)).map_err(|e| e.to_string())?;
    fs::write(&csv, bytes).map_err(|e| e.to_string())?;
    let mut config = ExperimentConfig {
        exp_id: "det".into(),
        expmodel_id: "gru".into(),
        input: Some(csv),
        ..Default::default()
    };
    config.train.n_epoch = 3;
    config.train.hidden_dim = 16;
    let mut trees = Vec::new();
    for i in 0..2 {
        let layout = Layout {
            root: tmp.path().join(format!("home{i}")),
        };
        let (mut out, mut err) = (Vec::new(), Vec::new());
        commands::run(&layout, &config, &mut out, &mut err).map_err(|e| e.line())?;
        trees.push((dir_bytes(&layout.root), out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    ensure(a.0 == b.0, || "artifact trees differ".into())?;
    ensure(a.1 == b.1, || "report output differs".into())?;
    let has = |needle: &str| a.0.keys().any(|k| k.to_string_lossy().contains(needle));
    ensure(has("reports") && has("results") && has("epoch_3.ckpt"), || {
        format!("missing artifacts: {:?}", a.0.keys())
    })?;
    Ok(format!("{} files byte-identical across two runs", a.0.len()))
}
