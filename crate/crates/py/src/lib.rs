//! Python bindings: configs, traces, datasets, ensemble models, metrics and
//! drift distances.

use std::path::PathBuf;

use arp_sentinel::drift::{build_histogram, drift_delta as core_drift_delta};
use arp_sentinel::featurize::{self as feat, Example};
use arp_sentinel::metrics::{confusion, derive_for, MetricsReport, Subject};
use arp_sentinel::model_io::{read_model, write_model, MODEL_MAGIC};
use arp_sentinel::resample::{smote_resample, SmoteConfig};
use arp_sentinel::sim::{self, ArpFrame};
use arp_sentinel::{artifact::Header, stages, Error, ExperimentConfig, FeatureVector, Label, LabeledDataset};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_label(s: &str) -> PyResult<Label> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown label `{s}`, expected benign|attack")))
}

#[pyclass(name = "Config", module = "arp_sentinel", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(text) => ExperimentConfig::from_toml(text, "<string>".as_ref()).map_err(to_py)?,
            None => ExperimentConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::load(&path).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    fn with_master_seed(&self, seed: u64) -> Self {
        Self {
            inner: self.inner.with_master_seed(seed),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(master_seed={}, hash={})",
            self.inner.master_seed,
            self.inner.hash()
        )
    }
}

#[pyclass(name = "Trace", module = "arp_sentinel", frozen)]
struct PyTrace {
    frames: Vec<ArpFrame>,
    nodes: usize,
}

#[pymethods]
impl PyTrace {
    fn __len__(&self) -> usize {
        self.frames.len()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.nodes
    }

    /// Frames as `(tick, src_node, op, sender_ip, sender_mac, target_ip,
    /// target_mac, label)` tuples.
    #[allow(clippy::type_complexity)]
    fn frames(&self) -> Vec<(u64, usize, String, String, String, String, String, String)> {
        self.frames
            .iter()
            .map(|f| {
                (
                    f.tick,
                    f.src_node,
                    f.op.as_str().to_owned(),
                    f.sender_ip.to_string(),
                    f.sender_mac.to_string(),
                    f.target_ip.to_string(),
                    f.target_mac.to_string(),
                    f.label.to_string(),
                )
            })
            .collect()
    }

    fn attack_count(&self) -> usize {
        self.frames.iter().filter(|f| f.label.is_attack()).count()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let header = Header::new(sim::trace::TRACE_MAGIC).with("nodes", self.nodes);
        sim::trace::write_trace_with_header(&self.frames, &path, &header).map_err(to_py)
    }
}

#[pyclass(name = "Dataset", module = "arp_sentinel", frozen)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, labels, feature_names = None))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> PyResult<Self> {
        if features.len() != labels.len() {
            return Err(PyValueError::new_err(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        let names = feature_names.unwrap_or_else(|| (0..dim).map(|i| format!("f{i}")).collect());
        let mut inner = LabeledDataset::new(names);
        for (x, l) in features.into_iter().zip(&labels) {
            inner
                .push(Example {
                    features: FeatureVector(x),
                    label: parse_label(l)?,
                })
                .map_err(to_py)?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: feat::read_dataset(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        feat::write_dataset(&self.inner, &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.examples.iter().map(|e| e.features.0.clone()).collect()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.examples.iter().map(|e| e.label.to_string()).collect()
    }

    fn count(&self, label: &str) -> PyResult<usize> {
        Ok(self.inner.count(parse_label(label)?))
    }

    /// Stratified `(train, test)` split.
    fn split(&self, train_fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = feat::split_dataset(&self.inner, train_fraction, seed).map_err(to_py)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(len={}, dim={}, attack={})",
            self.inner.len(),
            self.inner.dim(),
            self.inner.count(Label::Attack)
        )
    }
}

#[pyclass(name = "Model", module = "arp_sentinel", frozen)]
struct PyModel {
    inner: arp_sentinel::EnsembleModel,
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("subject", r.subject.to_string())?;
    d.set_item("tp", r.matrix.tp)?;
    d.set_item("fp", r.matrix.fp)?;
    d.set_item("fn", r.matrix.fn_)?;
    d.set_item("tn", r.matrix.tn)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("f1", r.f1)?;
    d.set_item("fpr", r.fpr)?;
    Ok(d)
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: read_model(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_model(&self.inner, &path, &Header::new(MODEL_MAGIC)).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn validation_accuracies(&self) -> Vec<f64> {
        self.inner.validation_accuracies.clone()
    }

    #[getter]
    fn layer_kinds(&self) -> Vec<&'static str> {
        self.inner.layers.iter().map(|l| l.kind().as_str()).collect()
    }

    /// Label for one raw (unscaled) feature vector.
    fn predict(&self, x: Vec<f64>) -> PyResult<String> {
        Ok(self.inner.predict(&x).map_err(to_py)?.to_string())
    }

    fn predict_many(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<String>> {
        rows.iter()
            .map(|x| Ok(self.inner.predict(x).map_err(to_py)?.to_string()))
            .collect()
    }

    fn layer_votes(&self, x: Vec<f64>) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .layer_votes(&x)
            .map_err(to_py)?
            .into_iter()
            .map(|l| l.to_string())
            .collect())
    }

    /// One metrics dict per layer followed by the ensemble's.
    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let report = arp_sentinel::evaluate(&self.inner, &data.inner).map_err(to_py)?;
        report.rows().iter().map(|r| report_dict(py, r)).collect()
    }
}

#[pyfunction]
fn simulate(py: Python<'_>, config: &PyConfig) -> PyResult<PyTrace> {
    let sim = config.inner.sim_config();
    let frames = py.detach(|| sim::run_simulation(&sim)).map_err(to_py)?;
    Ok(PyTrace {
        frames,
        nodes: sim.node_count,
    })
}

#[pyfunction]
fn load_trace(path: PathBuf) -> PyResult<PyTrace> {
    let (h, frames) = sim::trace::read_trace_with_header(&path).map_err(to_py)?;
    let nodes = match h.get("nodes") {
        Some(v) => v
            .parse()
            .map_err(|_| PyValueError::new_err(format!("invalid nodes={v} in trace header")))?,
        None => frames.iter().map(|f| f.src_node + 1).max().unwrap_or(0),
    };
    Ok(PyTrace { frames, nodes })
}

#[pyfunction]
fn featurize(trace: &PyTrace, config: &PyConfig) -> PyResult<PyDataset> {
    let truth = sim::GroundTruthTable::for_nodes(trace.nodes);
    let inner = feat::extract_features(&trace.frames, &config.inner.window, &truth).map_err(to_py)?;
    Ok(PyDataset { inner })
}

#[pyfunction]
#[pyo3(signature = (data, k_neighbors = 5, target_ratio = 1.0, seed = 0))]
fn smote(data: &PyDataset, k_neighbors: usize, target_ratio: f64, seed: u64) -> PyResult<PyDataset> {
    let cfg = SmoteConfig {
        k_neighbors,
        target_ratio,
        seed,
    };
    cfg.validate().map_err(to_py)?;
    Ok(PyDataset {
        inner: smote_resample(&data.inner, &cfg).map_err(to_py)?,
    })
}

#[pyfunction]
fn train_ensemble(py: Python<'_>, data: &PyDataset, config: &PyConfig) -> PyResult<PyModel> {
    let cfg = config.inner.ensemble_config();
    let inner = py
        .detach(|| arp_sentinel::train_ensemble(&data.inner, &cfg))
        .map_err(to_py)?;
    Ok(PyModel { inner })
}

/// Confusion counts and derived ratios; undefined ratios are `None`.
#[pyfunction]
fn metrics<'py>(
    py: Python<'py>,
    predicted: Vec<String>,
    actual: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = predicted
        .iter()
        .map(|s| parse_label(s))
        .collect::<PyResult<Vec<_>>>()?;
    let a = actual
        .iter()
        .map(|s| parse_label(s))
        .collect::<PyResult<Vec<_>>>()?;
    let m = confusion(&p, &a).map_err(to_py)?;
    report_dict(py, &derive_for(Subject::Ensemble, m))
}

/// Mean per-feature total-variation distance between two sets of vectors.
#[pyfunction]
#[pyo3(signature = (reference, current, bins = 20, threshold = 0.25))]
fn drift_delta<'py>(
    py: Python<'py>,
    reference: Vec<Vec<f64>>,
    current: Vec<Vec<f64>>,
    bins: usize,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let wrap = |rows: Vec<Vec<f64>>| rows.into_iter().map(FeatureVector).collect::<Vec<_>>();
    let prev = build_histogram(&wrap(reference), bins).map_err(to_py)?;
    let curr = build_histogram(&wrap(current), bins).map_err(to_py)?;
    let r = core_drift_delta(&prev, &curr, threshold, 0).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("delta", r.delta)?;
    d.set_item("per_feature_delta", r.per_feature_delta)?;
    d.set_item("triggered", r.triggered)?;
    Ok(d)
}

/// Runs every file-based stage into `out`; returns the written paths.
#[pyfunction]
fn run_pipeline(py: Python<'_>, config: &PyConfig, out: PathBuf) -> PyResult<Vec<PathBuf>> {
    let cfg = config.inner.clone();
    py.detach(|| stages::run_all(&cfg, &out)).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "arp_sentinel")]
fn arp_sentinel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(load_trace, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(smote, m)?)?;
    m.add_function(wrap_pyfunction!(train_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(drift_delta, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
