//! Python bindings: datasets, benchmark models, estimators, discovery,
//! generators and the experiment harness. Structured results come back as
//! plain dicts and lists.

use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use causalbench::causalgan::{train_causal_gan, CausalGanConfig};
use causalbench::discovery::{lingam_fit, var_lingam_fit, LingamConfig};
use causalbench::gan::{train_gan, GanConfig};
use causalbench::graph::WeightedDag;
use causalbench::harness::{render_tables, run_experiment as run_exp, Checkpoint, ExperimentConfig, Report};
use causalbench::inference::{ar_fit, ols_fit, FitOptions, RegressionSpec};
use causalbench::scm::{model_a_with, model_b_with, sample, ModelParams, NoiseDist};
use causalbench::timegan::{train_timegan, TimeGanConfig};
use causalbench::{Error, PanelDataset};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) | Error::InvalidDataset(_) | Error::UnknownColumn(_) | Error::Shape(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        None => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

/// A table of named real-valued columns.
#[pyclass(name = "Dataset", module = "causalbench_py")]
struct PyDataset {
    inner: PanelDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (columns, rows, time_indexed = true))]
    fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, time_indexed: bool) -> PyResult<Self> {
        let k = columns.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(PyValueError::new_err(format!("every row needs {k} values")));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let n = flat.len() / k.max(1);
        let matrix = Array2::from_shape_vec((n, k), flat).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyDataset { inner: PanelDataset::new(columns, matrix, time_indexed).map_err(err)? })
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: PanelDataset::read_csv(path).map_err(err)? })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(err)
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns().to_vec()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.nrows(), self.inner.ncols())
    }

    #[getter]
    fn time_indexed(&self) -> bool {
        self.inner.is_time_indexed()
    }

    #[getter]
    fn segment_starts(&self) -> Vec<usize> {
        self.inner.segment_starts().to_vec()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.column(name).map_err(err)?.to_vec())
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.nrows()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({} x {}, columns={:?})", self.inner.nrows(), self.inner.ncols(), self.inner.columns())
    }
}

fn noise_from(name: &str) -> PyResult<NoiseDist> {
    match name {
        "gaussian" => Ok(NoiseDist::gaussian(0.0, 0.5)),
        "uniform" => Ok(NoiseDist::uniform(-1.0, 1.0)),
        other => serde_json::from_str(other).map_err(|e| PyValueError::new_err(format!("noise: {e}"))),
    }
}

/// Samples benchmark model "A" or "B".
#[pyfunction]
#[pyo3(signature = (model, n, seed = 0, noise = "gaussian"))]
fn sample_model(model: &str, n: usize, seed: u64, noise: &str) -> PyResult<PyDataset> {
    let params = ModelParams::with_noise(noise_from(noise)?);
    let spec = match model {
        "A" | "a" => model_a_with(&params),
        "B" | "b" => model_b_with(&params),
        other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
    }
    .map_err(err)?;
    Ok(PyDataset { inner: sample(&spec, n, seed).map_err(err)? })
}

fn regression(target: &str, regressors: Vec<(String, u8)>, intercept: bool) -> RegressionSpec {
    let pairs: Vec<(&str, u8)> = regressors.iter().map(|(n, l)| (n.as_str(), *l)).collect();
    let spec = RegressionSpec::new(target, &pairs);
    if intercept {
        spec
    } else {
        spec.without_intercept()
    }
}

/// Cross-sectional OLS. `regressors` is a list of `(name, lag)` pairs.
#[pyfunction]
#[pyo3(signature = (data, target, regressors, intercept = true))]
fn ols<'py>(
    py: Python<'py>,
    data: &PyDataset,
    target: &str,
    regressors: Vec<(String, u8)>,
    intercept: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let report = ols_fit(&data.inner, &regression(target, regressors, intercept)).map_err(err)?;
    to_py(py, &report)
}

/// Autoregression; the target's own lag-1 term must be among the regressors.
#[pyfunction]
#[pyo3(signature = (data, target, regressors, intercept = true, force_order = false))]
fn ar<'py>(
    py: Python<'py>,
    data: &PyDataset,
    target: &str,
    regressors: Vec<(String, u8)>,
    intercept: bool,
    force_order: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = if force_order { FitOptions::forced() } else { FitOptions::default() };
    let report = ar_fit(&data.inner, &regression(target, regressors, intercept), opts).map_err(err)?;
    to_py(py, &report)
}

#[derive(Serialize)]
struct GraphOut<'a> {
    graph: &'a WeightedDag,
    causal_order: Vec<&'a str>,
    identifiable: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    lagged_edges: Vec<causalbench::graph::Edge>,
}

/// ICA-LiNGAM; returns the pruned graph and causal order.
#[pyfunction]
#[pyo3(signature = (data, seed = 0, threshold = 0.1))]
fn lingam<'py>(py: Python<'py>, data: &PyDataset, seed: u64, threshold: f64) -> PyResult<Bound<'py, PyAny>> {
    let fit = lingam_fit(&data.inner, LingamConfig { seed, prune_threshold: threshold, ..Default::default() }).map_err(err)?;
    let out = GraphOut {
        graph: &fit.pruned_graph,
        causal_order: fit.causal_order_names(),
        identifiable: fit.identifiable,
        lagged_edges: Vec::new(),
    };
    to_py(py, &out)
}

/// VAR(1)-LiNGAM on time-ordered data.
#[pyfunction]
#[pyo3(signature = (data, seed = 0, threshold = 0.1))]
fn var_lingam<'py>(py: Python<'py>, data: &PyDataset, seed: u64, threshold: f64) -> PyResult<Bound<'py, PyAny>> {
    let fit = var_lingam_fit(&data.inner, LingamConfig { seed, prune_threshold: threshold, ..Default::default() })
        .map_err(err)?;
    let c = &fit.contemporaneous;
    let out = GraphOut {
        graph: &c.pruned_graph,
        causal_order: c.causal_order_names(),
        identifiable: c.identifiable,
        lagged_edges: fit.lagged_edges.clone(),
    };
    to_py(py, &out)
}

/// A trained generator of any kind.
#[pyclass(name = "Generator", module = "causalbench_py")]
struct PyGenerator {
    inner: Checkpoint,
}

#[pymethods]
impl PyGenerator {
    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<PyDataset> {
        Ok(PyDataset { inner: self.inner.sample(n, seed).map_err(err)? })
    }

    fn training_log<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let text = self.inner.log_json().map_err(err)?;
        py.import("json")?.call_method1("loads", (text,))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            Checkpoint::Gan(_) => "gan",
            Checkpoint::Timegan(_) => "timegan",
            Checkpoint::Causalgan(_) => "causalgan",
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyGenerator { inner })
    }
}

/// Vanilla GAN. `config` is an optional JSON object of hyperparameters.
#[pyfunction]
#[pyo3(signature = (data, config = None, seed = 0))]
fn train_gan_py(py: Python<'_>, data: &PyDataset, config: Option<&str>, seed: u64) -> PyResult<PyGenerator> {
    let cfg = GanConfig { seed, ..parse_json(config)? };
    let trained = py.detach(|| train_gan(&data.inner, &cfg)).map_err(err)?;
    Ok(PyGenerator { inner: Checkpoint::Gan(trained) })
}

#[pyfunction]
#[pyo3(signature = (data, config = None, seed = 0))]
fn train_timegan_py(py: Python<'_>, data: &PyDataset, config: Option<&str>, seed: u64) -> PyResult<PyGenerator> {
    let cfg = TimeGanConfig { seed, ..parse_json(config)? };
    let trained = py.detach(|| train_timegan(&data.inner, &cfg)).map_err(err)?;
    Ok(PyGenerator { inner: Checkpoint::Timegan(trained) })
}

/// CausalGAN wired along `graph` (JSON `{nodes, edges}`), or along the
/// LiNGAM graph of `data` when omitted.
#[pyfunction]
#[pyo3(signature = (data, graph = None, config = None, seed = 0))]
fn train_causal_gan_py(
    py: Python<'_>,
    data: &PyDataset,
    graph: Option<&str>,
    config: Option<&str>,
    seed: u64,
) -> PyResult<PyGenerator> {
    let cfg = CausalGanConfig { seed, ..parse_json(config)? };
    let graph: WeightedDag = match graph {
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => lingam_fit(&data.inner, LingamConfig { seed, ..Default::default() }).map_err(err)?.pruned_graph,
    };
    let trained = py.detach(|| train_causal_gan(&data.inner, &graph, &cfg)).map_err(err)?;
    Ok(PyGenerator { inner: Checkpoint::Causalgan(trained) })
}

/// Runs a full experiment from a JSON config and returns the report.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let report = py.detach(|| run_exp(&cfg)).map_err(err)?;
    to_py(py, &report)
}

/// Text tables for a report produced by `run_experiment`.
#[pyfunction]
fn render_report(report: &Bound<'_, PyAny>) -> PyResult<String> {
    let py = report.py();
    let text: String = py.import("json")?.call_method1("dumps", (report,))?.extract()?;
    let report = Report::from_json(&text).map_err(err)?;
    Ok(render_tables(&report).map_err(err)?.text)
}

#[pymodule]
fn causalbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(sample_model, m)?)?;
    m.add_function(wrap_pyfunction!(ols, m)?)?;
    m.add_function(wrap_pyfunction!(ar, m)?)?;
    m.add_function(wrap_pyfunction!(lingam, m)?)?;
    m.add_function(wrap_pyfunction!(var_lingam, m)?)?;
    m.add("train_gan", wrap_pyfunction!(train_gan_py, m)?)?;
    m.add("train_timegan", wrap_pyfunction!(train_timegan_py, m)?)?;
    m.add("train_causal_gan", wrap_pyfunction!(train_causal_gan_py, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    Ok(())
}
