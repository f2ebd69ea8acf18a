//! Python bindings. Marshaling only: every operation forwards to the
//! `healthpipe` library, and artifacts land in the same layout the CLI uses,
//! so either front end can pick up where the other stopped.
//!
//! ```python
//! from healthpipe import expdata_generator, LSTM, func
//! data = expdata_generator(exp_id="demo")
//! data.get_exp_data(sel_task="mortality")
//! data.load_exp_data()
//! model = LSTM(expmodel_id="m1", n_batchsize=20, n_epoch=10)
//! model.fit(data.train, data.valid)
//! model.inference(data.test)
//! metrics = func(model.get_results()["hat_y"], model.get_results()["y"])
//! ```
//!
//! Failures raise `HealthpipeError(code, message)`.

use std::path::PathBuf;
use std::rc::Rc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyUserWarning};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use healthpipe::evaluate::evaluate_rows;
use healthpipe::fsutil::atomic_write;
use healthpipe::models::{make_predictor, ModelDims, ModelKind, NeuralPredictor, Predictor, TrainConfig};
use healthpipe::preprocess::{
    generate_dataset, generate_dataset_from_bytes, load_dataset, save_dataset, ExperimentDataset, LabeledExample,
};
use healthpipe::{Error, TaskKind, ValidationError};
use healthpipe_cli::config::{check_token, Layout, ModelSpec};
use healthpipe_cli::demo::{generate, DemoSpec};

create_exception!(
    healthpipe,
    HealthpipeError,
    PyException,
    "Raised with args (code, message)."
);

fn raise(e: impl Into<Error>) -> PyErr {
    let e = e.into();
    HealthpipeError::new_err((e.code().to_string(), e.to_string()))
}

fn protocol(msg: &str) -> PyErr {
    raise(Error::Protocol(msg.into()))
}

/// One split of a loaded dataset, tagged with where it came from.
#[pyclass(unsendable, skip_from_py_object, module = "healthpipe")]
#[derive(Clone)]
struct ExampleSet {
    examples: Rc<Vec<LabeledExample>>,
    exp_id: String,
    layout: Layout,
    task: TaskKind,
    dims: ModelDims,
}

#[pymethods]
impl ExampleSet {
    fn __len__(&self) -> usize {
        self.examples.len()
    }

    #[getter]
    fn task(&self) -> &'static str {
        self.task.as_str()
    }

    #[getter]
    fn exp_id(&self) -> &str {
        &self.exp_id
    }

    #[getter]
    fn patient_ids(&self) -> Vec<String> {
        self.examples.iter().map(|e| e.patient_id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ExampleSet(exp_id={:?}, task={:?}, n={})",
            self.exp_id,
            self.task.as_str(),
            self.examples.len()
        )
    }
}

/// Generates, saves and loads the dataset for one `exp_id`.
#[pyclass(unsendable, module = "healthpipe", name = "expdata_generator")]
struct ExpData {
    exp_id: String,
    layout: Layout,
    loaded: Option<ExperimentDataset>,
}

impl ExpData {
    fn split(&self, pick: fn(&ExperimentDataset) -> &Vec<LabeledExample>) -> PyResult<ExampleSet> {
        let ds = self
            .loaded
            .as_ref()
            .ok_or_else(|| protocol("call load_exp_data() first"))?;
        Ok(ExampleSet {
            examples: Rc::new(pick(ds).clone()),
            exp_id: self.exp_id.clone(),
            layout: self.layout.clone(),
            task: ds.task,
            dims: ModelDims {
                input_dim: ds.vocab_size(),
                max_visits: ds.max_visits,
                output_dim: ds.label_dim,
            },
        })
    }
}

#[pymethods]
impl ExpData {
    /// `root` defaults to `$HEALTHPIPE_HOME`, else `./experiments`.
    #[new]
    #[pyo3(signature = (exp_id, root = None))]
    fn new(exp_id: String, root: Option<PathBuf>) -> PyResult<Self> {
        check_token("exp_id", &exp_id).map_err(raise)?;
        Ok(Self {
            exp_id,
            layout: Layout::resolve(root.as_deref()),
            loaded: None,
        })
    }

    /// Builds and saves the task dataset. Without `data_path` the synthetic
    /// demo event stream is used.
    #[pyo3(signature = (sel_task = "mortality", data_path = None, n_workers = 1, demo_patients = 2000, demo_seed = 7))]
    fn get_exp_data(
        &mut self,
        sel_task: &str,
        data_path: Option<PathBuf>,
        n_workers: usize,
        demo_patients: usize,
        demo_seed: u64,
    ) -> PyResult<()> {
        let config = Default::default();
        let ds = match data_path {
            Some(path) => generate_dataset(&self.exp_id, &path, sel_task, &config, n_workers),
            None => {
                let (csv, _) = generate(&DemoSpec::new(demo_patients, demo_seed)).map_err(raise)?;
                generate_dataset_from_bytes(&self.exp_id, &csv, sel_task, &config, n_workers)
            }
        }
        .map_err(raise)?;
        save_dataset(&ds, &self.layout.data_dir(&self.exp_id)).map_err(raise)
    }

    fn load_exp_data(&mut self) -> PyResult<()> {
        let dir = self.layout.data_dir(&self.exp_id);
        if !dir.exists() {
            return Err(raise(ValidationError::empty(
                "exp_id",
                format!(
                    "no dataset generated for exp_id {:?}; call get_exp_data() first",
                    self.exp_id
                ),
            )));
        }
        self.loaded = Some(load_dataset(&dir).map_err(raise)?);
        Ok(())
    }

    #[getter]
    fn train(&self) -> PyResult<ExampleSet> {
        self.split(|d| &d.train)
    }

    #[getter]
    fn valid(&self) -> PyResult<ExampleSet> {
        self.split(|d| &d.valid)
    }

    #[getter]
    fn test(&self) -> PyResult<ExampleSet> {
        self.split(|d| &d.test)
    }

    #[getter]
    fn exp_id(&self) -> &str {
        &self.exp_id
    }
}

/// Shared base of the model classes.
#[pyclass(unsendable, subclass, module = "healthpipe")]
struct Model {
    kind: ModelKind,
    expmodel_id: String,
    config: TrainConfig,
    inner: Option<(NeuralPredictor, ExampleSet)>,
}

impl Model {
    fn build(
        py: Python<'_>,
        kind: ModelKind,
        expmodel_id: String,
        config: TrainConfig,
        use_gpu: bool,
    ) -> PyResult<Self> {
        check_token("expmodel_id", &expmodel_id).map_err(raise)?;
        config.validate().map_err(raise)?;
        if use_gpu {
            let category = py.get_type::<PyUserWarning>();
            PyErr::warn(
                py,
                category.as_any(),
                c"use_gpu=True is ignored; training runs on the CPU",
                1,
            )?;
        }
        Ok(Self {
            kind,
            expmodel_id,
            config,
            inner: None,
        })
    }

    fn fitted(&mut self) -> PyResult<&mut (NeuralPredictor, ExampleSet)> {
        self.inner.as_mut().ok_or_else(|| protocol("call fit() first"))
    }
}

#[pymethods]
impl Model {
    /// Trains with one checkpoint per epoch under the experiment's
    /// checkpoint directory.
    fn fit(&mut self, train: &ExampleSet, valid: &ExampleSet) -> PyResult<()> {
        let dir = train.layout.checkpoint_dir(&train.exp_id, &self.expmodel_id);
        let mut model = make_predictor(self.kind, train.dims, train.task, self.config.clone(), &dir).map_err(raise)?;
        model.fit(&train.examples, &valid.examples).map_err(raise)?;
        let spec = ModelSpec {
            model: self.kind,
            train: self.config.clone(),
        };
        let json = serde_json::to_string_pretty(&spec).expect("model spec serializes");
        atomic_write(
            &train.layout.model_file(&train.exp_id, &self.expmodel_id),
            json.as_bytes(),
        )
        .map_err(raise)?;
        self.inner = Some((model, train.clone()));
        Ok(())
    }

    /// Restores the best-validation checkpoint and returns its epoch.
    fn load_model(&mut self) -> PyResult<usize> {
        self.fitted()?.0.load_model().map_err(raise)
    }

    fn inference(&mut self, test: &ExampleSet) -> PyResult<()> {
        self.fitted()?.0.inference(&test.examples).map_err(raise)
    }

    /// `{"hat_y": [[p, ...], ...], "y": [[0|1, ...], ...]}` for the last
    /// `inference` call.
    fn get_results<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.fitted()?.0.get_results().map_err(raise)?;
        let out = PyDict::new(py);
        out.set_item("hat_y", r.hat_y.clone())?;
        out.set_item("y", r.y.clone())?;
        Ok(out)
    }

    /// Writes the results file where `healthpipe infer` would and returns
    /// its path.
    #[pyo3(signature = (path = None))]
    fn save_results(&mut self, path: Option<PathBuf>) -> PyResult<PathBuf> {
        let mid = self.expmodel_id.clone();
        let (model, set) = self.fitted()?;
        let path = path.unwrap_or_else(|| set.layout.results_file(&set.exp_id, &mid));
        model.get_results().map_err(raise)?.write(&path).map_err(raise)?;
        Ok(path)
    }

    #[getter]
    fn expmodel_id(&self) -> &str {
        &self.expmodel_id
    }

    #[getter]
    fn checkpoint_dir(&self) -> Option<PathBuf> {
        self.inner.as_ref().map(|(m, _)| m.checkpoint_dir().to_path_buf())
    }
}

fn train_config(
    n_batchsize: usize,
    n_epoch: usize,
    learning_rate: f64,
    hidden_dim: usize,
    seed: u64,
    use_gpu: bool,
) -> TrainConfig {
    TrainConfig {
        n_batchsize,
        n_epoch,
        learning_rate,
        hidden_dim,
        seed,
        use_gpu,
        ..Default::default()
    }
}

macro_rules! model_class {
    ($name:ident, $kind:expr) => {
        // class names follow the usual spelling of the architectures
        #[allow(clippy::upper_case_acronyms)]
        #[pyclass(unsendable, extends = Model, module = "healthpipe")]
        struct $name;

        #[pymethods]
        impl $name {
            #[allow(clippy::too_many_arguments)]
            #[new]
            #[pyo3(signature = (
                                expmodel_id = "default".to_string(),
                                n_batchsize = 20,
                                use_gpu = false,
                                n_epoch = 100,
                                learning_rate = 1e-3,
                                hidden_dim = 64,
                                seed = 42
                            ))]
            fn new(
                py: Python<'_>,
                expmodel_id: String,
                n_batchsize: usize,
                use_gpu: bool,
                n_epoch: usize,
                learning_rate: f64,
                hidden_dim: usize,
                seed: u64,
            ) -> PyResult<PyClassInitializer<$name>> {
                let config = train_config(n_batchsize, n_epoch, learning_rate, hidden_dim, seed, use_gpu);
                Ok(
                    PyClassInitializer::from(Model::build(py, $kind, expmodel_id, config, use_gpu)?)
                        .add_subclass($name),
                )
            }
        }
    };
}

model_class!(LSTM, ModelKind::Lstm);
model_class!(GRU, ModelKind::Gru);
model_class!(LR, ModelKind::Lr);
model_class!(TCNN, ModelKind::Tcnn);

/// Metric name to value, in report order, for the task inferred from `y`.
#[pyfunction]
fn func<'py>(py: Python<'py>, hat_y: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let report = evaluate_rows(&hat_y, &y).map_err(raise)?;
    let out = PyDict::new(py);
    for (name, value) in &report.metrics {
        out.set_item(name, value)?;
    }
    Ok(out)
}

/// Task kind (`"binary"`, `"multiclass"` or `"multilabel"`) for a label matrix.
#[pyfunction]
fn label_check(y: Vec<Vec<f64>>) -> PyResult<&'static str> {
    healthpipe::evaluate::label_check_rows(&y)
        .map(|k| k.as_str())
        .map_err(raise)
}

#[pymodule]
#[pyo3(name = "healthpipe")]
fn healthpipe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HealthpipeError", m.py().get_type::<HealthpipeError>())?;
    m.add_class::<ExpData>()?;
    m.add_class::<ExampleSet>()?;
    m.add_class::<Model>()?;
    m.add_class::<LSTM>()?;
    m.add_class::<GRU>()?;
    m.add_class::<LR>()?;
    m.add_class::<TCNN>()?;
    m.add_function(wrap_pyfunction!(func, m)?)?;
    m.add_function(wrap_pyfunction!(label_check, m)?)?;
    Ok(())
}
