//! Python bindings: models, datasets, identification and simulation.
//!
//! Matrices cross the boundary as lists of rows (`list[list[float]]`).

use std::path::PathBuf;

use nalgebra::DMatrix;
use psaem_core::io::{self, RunConfig};
use psaem_core::{systems, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(psaem, PsaemError, PyException, "Base class of psaem errors.");
create_exception!(psaem, ParseError, PsaemError, "Malformed input file or configuration.");
create_exception!(psaem, DivergenceError, PsaemError, "A state became non-finite.");
create_exception!(psaem, RankDeficientError, PsaemError, "Singular M-step; add regularization.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Parse { .. } | Error::Format(_) => ParseError::new_err(msg),
        Error::Divergence { .. } => DivergenceError::new_err(msg),
        Error::RankDeficient { .. } => RankDeficientError::new_err(msg),
        Error::InvalidArgument(_) | Error::Dimension { .. } => PyValueError::new_err(msg),
        _ => PsaemError::new_err(msg),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a `len × cols` matrix; `cols` is only needed for empty input.
fn matrix(rows: &[Vec<f64>], cols: Option<usize>) -> PyResult<DMatrix<f64>> {
    let c = rows.first().map_or(cols.unwrap_or(0), Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(PyValueError::new_err("ragged matrix: rows differ in length"));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

#[pyclass(name = "Dataset", module = "psaem", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: psaem_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `y` is `T × n_y`; `u` is `T × n_u` or omitted for no inputs.
    #[new]
    #[pyo3(signature = (y, u=None))]
    fn new(y: Vec<Vec<f64>>, u: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let y = matrix(&y, None)?;
        let u = match u {
            Some(u) => matrix(&u, Some(0))?,
            None => DMatrix::zeros(y.nrows(), 0),
        };
        Ok(PyDataset { inner: psaem_core::Dataset::new(u, y).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: io::load_dataset(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_dataset(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.u)
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.y)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(T={}, n_u={}, n_y={})", self.inner.len(), self.inner.n_u(), self.inner.n_y())
    }
}

#[pyclass(name = "Model", module = "psaem", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: psaem_core::ModelParams,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = io::load_model_with_warnings(&path).map_err(to_py)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, _) = io::model_from_json(text).map_err(to_py)?;
        Ok(PyModel { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        io::model_to_json(&self.inner).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_model(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn n_x(&self) -> usize {
        self.inner.n_x
    }

    #[getter]
    fn n_u(&self) -> usize {
        self.inner.n_u
    }

    #[getter]
    fn n_y(&self) -> usize {
        self.inner.n_y
    }

    #[getter]
    #[allow(non_snake_case)]
    fn Gamma_f(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.gamma_f)
    }

    #[getter]
    #[allow(non_snake_case)]
    fn Gamma_g(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.gamma_g)
    }

    #[getter]
    #[allow(non_snake_case)]
    fn Q(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.q)
    }

    #[getter]
    #[allow(non_snake_case)]
    fn R(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.r)
    }

    /// The input-free part of the state function at `x`.
    fn state_fn(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.state_fn_x(&x).map_err(to_py)?.iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n_x={}, n_u={}, n_y={}, regressors={})",
            self.inner.n_x,
            self.inner.n_u,
            self.inner.n_y,
            self.inner.regressor_len()
        )
    }
}

/// Runs PSAEM with a TOML run configuration; `dataset` and `output_dir`
/// keys in it are ignored.
#[pyfunction]
#[pyo3(signature = (data, config, iterations=None, particles=None, seed=None))]
fn identify(
    py: Python<'_>,
    data: &PyDataset,
    config: &str,
    iterations: Option<usize>,
    particles: Option<usize>,
    seed: Option<u64>,
) -> PyResult<PyModel> {
    let (mut cfg, _) = RunConfig::from_toml_str(config).map_err(to_py)?;
    if let Some(k) = iterations {
        cfg.iterations = k;
    }
    if let Some(n) = particles {
        cfg.particles = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let run = cfg.build(&data.inner).map_err(to_py)?;
    let data = data.inner.clone();
    let result = py
        .detach(move || psaem_core::psaem_identify(&data, &run))
        .map_err(to_py)?;
    Ok(PyModel { inner: result.model })
}

/// Returns `(states, outputs)`, each a list of rows.
#[pyfunction]
#[pyo3(signature = (model, u=None, length=None, x1=None, seed=0, noise=false))]
fn simulate(
    model: &PyModel,
    u: Option<Vec<Vec<f64>>>,
    length: Option<usize>,
    x1: Option<Vec<f64>>,
    seed: u64,
    noise: bool,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let m = &model.inner;
    let u = match (u, length) {
        (Some(u), None) => matrix(&u, Some(m.n_u))?,
        (None, Some(t)) => DMatrix::zeros(t, m.n_u),
        _ => return Err(PyValueError::new_err("give exactly one of `u` and `length`")),
    };
    let x1 = x1.unwrap_or_else(|| m.init_mean.iter().copied().collect());
    let sim = psaem_core::simulate(m, &u, &x1, seed, noise).map_err(to_py)?;
    Ok((rows(&sim.x), rows(&sim.y)))
}

/// Mean, standard deviation and RMS of `y_true - y_sim`.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, y_true: Vec<Vec<f64>>, y_sim: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let e = psaem_core::metrics(&matrix(&y_true, None)?, &matrix(&y_sim, None)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean_error", e.mean_error)?;
    d.set_item("std_error", e.std_error)?;
    d.set_item("rmse", e.rmse)?;
    Ok(d)
}

/// Data from the scalar benchmark system; returns `(dataset, states)`.
#[pyfunction]
#[pyo3(signature = (length, seed=0))]
fn generate_example1(length: usize, seed: u64) -> (PyDataset, Vec<Vec<f64>>) {
    let (data, x) = systems::generate_example1(length, seed);
    (PyDataset { inner: data }, rows(&x))
}

/// One conditional particle filter sweep with ancestor sampling; returns
/// the sampled trajectory.
#[pyfunction]
#[pyo3(signature = (model, data, reference, particles, seed=0))]
fn cpf_as(
    model: &PyModel,
    data: &PyDataset,
    reference: Vec<Vec<f64>>,
    particles: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let reference = matrix(&reference, Some(model.inner.n_x))?;
    let (traj, _) = psaem_core::cpf_as(&model.inner, &data.inner, &reference, particles, seed).map_err(to_py)?;
    Ok(rows(&traj))
}

#[pymodule]
fn psaem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(generate_example1, m)?)?;
    m.add_function(wrap_pyfunction!(cpf_as, m)?)?;
    m.add("PsaemError", py.get_type::<PsaemError>())?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("DivergenceError", py.get_type::<DivergenceError>())?;
    m.add("RankDeficientError", py.get_type::<RankDeficientError>())?;
    Ok(())
}
