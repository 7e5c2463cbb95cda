//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use repalign_core::embedding::{self as emb, SetMeta, TokenEmbeddings};
use repalign_core::evaluation::{self as ev, AlignParams, Method};
use repalign_core::inn::{self, Real, TrainConfig};
use repalign_core::linear::{self, IndexKind, IndexParams};
use repalign_core::numerics::Matrix;
use repalign_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::NotBijective { .. } => PyValueError::new_err(e.to_string()),
        Error::Io { .. } | Error::CorruptFile { .. } => PyOSError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(PyValueError::new_err("expected a non-empty list of rows"));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows differ in length"));
    }
    Ok(Matrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|v| v.to_f64()).collect()).collect()
}

fn to_python<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "EmbeddingSet", module = "repalign")]
struct PyEmbeddingSet(emb::EmbeddingSet);

#[pymethods]
impl PyEmbeddingSet {
    #[new]
    #[pyo3(signature = (data, model_id, seed, layer, dataset, dtype = "f64"))]
    fn new(data: Vec<Vec<f64>>, model_id: &str, seed: u64, layer: u32, dataset: &str, dtype: &str) -> PyResult<Self> {
        let meta = SetMeta::new(model_id, seed, layer, dataset);
        let set = match dtype {
            "f64" => emb::EmbeddingSet::new(matrix(data)?, meta),
            "f32" => emb::EmbeddingSet::new_f32(matrix(data)?, meta),
            other => return Err(PyValueError::new_err(format!("unknown dtype '{other}'"))),
        };
        set.map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        emb::load_embedding_set(path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        emb::save_embedding_set(&self.0, path).map(|_| ()).map_err(py_err)
    }

    fn data(&self) -> Vec<Vec<f64>> {
        rows(self.0.data())
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    #[getter]
    fn dtype(&self) -> &'static str {
        match self.0.dtype() {
            emb::Dtype::F32 => "f32",
            emb::Dtype::F64 => "f64",
        }
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id()
    }

    fn __repr__(&self) -> String {
        format!("EmbeddingSet({}x{}, {})", self.0.n(), self.0.d(), self.0.id())
    }
}

#[pyfunction]
fn mean_pool(tokens: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let t = TokenEmbeddings::new(matrix(tokens)?).map_err(py_err)?;
    Ok(emb::mean_pool(&t).iter().copied().collect())
}

/// Mean row distance and its value relative to the mean row norm of `b`.
#[pyfunction]
fn set_distance(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
    let d = ev::set_distance(&matrix(a)?, &matrix(b)?).map_err(py_err)?;
    Ok((d.raw, d.rel))
}

#[pyfunction]
#[pyo3(signature = (x, y, kind, variance_threshold = linear::DEFAULT_VARIANCE_THRESHOLD))]
fn similarity_index(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, kind: &str, variance_threshold: f64) -> PyResult<f64> {
    let kind: IndexKind = kind.parse().map_err(py_err)?;
    let params = IndexParams { variance_threshold };
    linear::similarity_index(&matrix(x)?, &matrix(y)?, kind, &params).map_err(py_err)
}

#[pyclass(name = "LinearMap", module = "repalign")]
struct PyLinearMap(linear::LinearMap);

#[pymethods]
impl PyLinearMap {
    fn apply(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&linear::apply_linear(&self.0, &matrix(x)?).map_err(py_err)?))
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        rows(&self.0.w)
    }
}

#[pyfunction]
fn fit_linreg(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<PyLinearMap> {
    linear::fit_linreg(&matrix(x)?, &matrix(y)?).map(PyLinearMap).map_err(py_err)
}

#[pyclass(name = "CcaModel", module = "repalign")]
struct PyCcaModel(linear::CcaModel);

#[pymethods]
impl PyCcaModel {
    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.0.rho.clone()
    }

    fn transform(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&linear::cca_transform(&self.0, &matrix(x)?).map_err(py_err)?))
    }

    fn pwcca(&self, x: Vec<Vec<f64>>) -> PyResult<f64> {
        Ok(linear::pwcca(&self.0, &matrix(x)?).map_err(py_err)?.score)
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, components = None))]
fn fit_cca(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, components: Option<usize>) -> PyResult<PyCcaModel> {
    let (x, y) = (matrix(x)?, matrix(y)?);
    let c = components.unwrap_or(x.ncols().min(y.ncols()));
    linear::fit_cca(&x, &y, c).map(PyCcaModel).map_err(py_err)
}

enum AnyInn {
    F32(inn::InnModel<f32>),
    F64(inn::InnModel<f64>),
}

#[pyclass(name = "InnModel", module = "repalign")]
struct PyInnModel(AnyInn);

#[pymethods]
impl PyInnModel {
    /// A random non-linear invertible map in double precision.
    #[staticmethod]
    fn random(dim: usize, layers: usize, seed: u64) -> PyResult<Self> {
        inn::random_inn::<f64>(dim, layers, seed).map(|m| Self(AnyInn::F64(m))).map_err(py_err)
    }

    /// Train a single-precision model mapping rows of `x` onto rows of `y`.
    #[staticmethod]
    #[pyo3(signature = (x, y, layers = 6, width = 256, learning_rate = 1e-3, batch_size = 256, max_epochs = 200, patience = 20, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        layers: usize,
        width: usize,
        learning_rate: f64,
        batch_size: usize,
        max_epochs: usize,
        patience: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let (x, y) = (matrix(x)?, matrix(y)?);
        let cfg = TrainConfig {
            layers,
            width,
            learning_rate,
            batch_size,
            max_epochs,
            patience,
            seed,
            ..TrainConfig::default()
        };
        let out = py.detach(|| inn::fit_inn(&x, &y, &cfg)).map_err(py_err)?;
        Ok(Self(AnyInn::F32(out.model)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        let model = match inn::inn_dtype(&bytes) {
            Some(emb::Dtype::F32) => AnyInn::F32(inn::read_inn(&bytes).map_err(py_err)?),
            _ => AnyInn::F64(inn::read_inn(&bytes).map_err(py_err)?),
        };
        Ok(Self(model))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        match &self.0 {
            AnyInn::F32(m) => inn::save_inn(m, path),
            AnyInn::F64(m) => inn::save_inn(m, path),
        }
        .map_err(py_err)
    }

    fn forward(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(x)?;
        match &self.0 {
            AnyInn::F32(m) => m.forward(&x.map(|v| v as f32)).map(|y| rows(&y)),
            AnyInn::F64(m) => m.forward(&x).map(|y| rows(&y)),
        }
        .map_err(py_err)
    }

    fn inverse(&self, y: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let y = matrix(y)?;
        match &self.0 {
            AnyInn::F32(m) => m.inverse(&y.map(|v| v as f32)).map(|x| rows(&x)),
            AnyInn::F64(m) => m.inverse(&y).map(|x| rows(&x)),
        }
        .map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        match &self.0 {
            AnyInn::F32(m) => m.dim,
            AnyInn::F64(m) => m.dim,
        }
    }

    #[getter]
    fn num_layers(&self) -> usize {
        match &self.0 {
            AnyInn::F32(m) => m.layers.len(),
            AnyInn::F64(m) => m.layers.len(),
        }
    }

    #[getter]
    fn num_params(&self) -> usize {
        match &self.0 {
            AnyInn::F32(m) => m.num_params(),
            AnyInn::F64(m) => m.num_params(),
        }
    }

    #[getter]
    fn dtype(&self) -> &'static str {
        match &self.0 {
            AnyInn::F32(_) => "f32",
            AnyInn::F64(_) => "f64",
        }
    }
}

/// Fit `method` on the training rows and return the report as a dict.
#[pyfunction]
#[pyo3(signature = (method, x_train, y_train, x_test, y_test, seed = 0))]
fn evaluate<'py>(
    py: Python<'py>,
    method: &str,
    x_train: Vec<Vec<f64>>,
    y_train: Vec<Vec<f64>>,
    x_test: Vec<Vec<f64>>,
    y_test: Vec<Vec<f64>>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let method: Method = method.parse().map_err(py_err)?;
    let (xtr, ytr, xte, yte) = (matrix(x_train)?, matrix(y_train)?, matrix(x_test)?, matrix(y_test)?);
    let mut params = AlignParams::default();
    params.train.seed = seed;
    let report = py
        .detach(|| ev::evaluate_aligner(method, &xtr, &ytr, &xte, &yte, &params))
        .map_err(py_err)?;
    to_python(py, &report)
}

/// Compare analytic and central-difference gradients on a random
/// double-precision model.
#[pyfunction]
#[pyo3(signature = (dim = 8, layers = 2, width = 16, rows = 16, seed = 0, tolerance = 1e-4))]
fn grad_check<'py>(
    py: Python<'py>,
    dim: usize,
    layers: usize,
    width: usize,
    rows: usize,
    seed: u64,
    tolerance: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = inn::RandomInnSpec {
        width,
        ..inn::RandomInnSpec::default()
    };
    let model = inn::random_inn_with::<f64>(dim, layers, seed, &spec).map_err(py_err)?;
    let report = inn::grad_check(&model, rows, seed, tolerance).map_err(py_err)?;
    to_python(py, &report)
}

#[pymodule]
fn repalign(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyEmbeddingSet>()?;
    m.add_class::<PyLinearMap>()?;
    m.add_class::<PyCcaModel>()?;
    m.add_class::<PyInnModel>()?;
    m.add_function(wrap_pyfunction!(mean_pool, m)?)?;
    m.add_function(wrap_pyfunction!(set_distance, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_index, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linreg, m)?)?;
    m.add_function(wrap_pyfunction!(fit_cca, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    Ok(())
}
