//! Python bindings: states, protocols, simulation, reconstruction and the
//! command-line experiments.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qudit_tomo::experiments::{self, Experiment, ExperimentConfig};
use qudit_tomo::protocols::{self as core_protocols, TomographyProtocol};
use qudit_tomo::qcore::{self, CMatrix, RandomSeed};
use qudit_tomo::readout::SpamModel;
use qudit_tomo::recon::{self, SpamAssumption};
use qudit_tomo::sim::{self, CountsDataset, NoiseConfig, Truth};
use qudit_tomo::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn from_rows(rows: &[Vec<Complex64>]) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Density matrix of a qudit.
#[pyclass(name = "DensityMatrix", module = "qudit_tomo_py", from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix(qcore::DensityMatrix);

#[pymethods]
impl PyDensityMatrix {
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        qcore::DensityMatrix::new(from_rows(&rows)?).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn pure(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        qcore::DensityMatrix::pure(&qcore::linalg::CVector::from_vec(amplitudes)).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn basis(d: usize, k: usize) -> PyResult<Self> {
        qcore::DensityMatrix::basis(d, k).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn maximally_mixed(d: usize) -> Self {
        Self(qcore::DensityMatrix::maximally_mixed(d))
    }

    /// Haar-random pure state.
    #[staticmethod]
    fn haar_random(d: usize, seed: u64) -> PyResult<Self> {
        let psi = qcore::haar_random_state(d, RandomSeed::new(seed)).map_err(py_err)?;
        qcore::DensityMatrix::pure(&psi).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn to_list(&self) -> Vec<Vec<Complex64>> {
        to_rows(self.0.matrix())
    }

    fn populations(&self) -> Vec<f64> {
        self.0.populations()
    }

    /// `(1 - p) rho + p I / d`.
    fn depolarize(&self, p: f64) -> PyResult<Self> {
        qcore::depolarize(&self.0, p).map(Self).map_err(py_err)
    }

    fn fidelity(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        qcore::fidelity_states(&self.0, &other.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={}, populations={:?})", self.0.dim(), self.0.populations())
    }
}

/// Set of measurement circuits.
#[pyclass(name = "Protocol", module = "qudit_tomo_py", from_py_object)]
#[derive(Clone)]
struct PyProtocol(TomographyProtocol);

#[pymethods]
impl PyProtocol {
    #[staticmethod]
    fn two_level(d: usize) -> PyResult<Self> {
        core_protocols::qst_two_level(d).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn mub(d: usize) -> PyResult<Self> {
        core_protocols::mub_protocol(d).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn process_two_level(d: usize) -> PyResult<Self> {
        core_protocols::qpt_two_level(d).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        TomographyProtocol::from_json(text).map(Self).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn gate_counts(&self) -> Vec<usize> {
        self.0.circuits.iter().map(|c| c.gate_count()).collect()
    }

    /// `(rank, required_rank, complete)` under ideal SPAM.
    fn completeness(&self) -> PyResult<(usize, usize, bool)> {
        let r = core_protocols::completeness_check(&self.0, &SpamModel::ideal()).map_err(py_err)?;
        Ok((r.rank, r.required, r.complete))
    }
}

/// Outcome counts of a protocol run.
#[pyclass(name = "Counts", module = "qudit_tomo_py", from_py_object)]
#[derive(Clone)]
struct PyCounts(CountsDataset);

#[pymethods]
impl PyCounts {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CountsDataset::from_json(text).map(Self).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[getter]
    fn total_shots(&self) -> u64 {
        self.0.total_shots()
    }

    /// Counts per circuit and outcome.
    fn counts(&self) -> Vec<Vec<f64>> {
        self.0.weights()
    }
}

/// Samples `total_shots` outcomes of `protocol` on `state`, with depolarizing
/// gate noise of strength `gate_depol_p` and ideal SPAM.
#[pyfunction]
#[pyo3(signature = (protocol, state, total_shots, seed, gate_depol_p = 0.0))]
fn simulate_state(protocol: &PyProtocol, state: &PyDensityMatrix, total_shots: u64, seed: u64, gate_depol_p: f64) -> PyResult<PyCounts> {
    let noise = NoiseConfig::new(gate_depol_p, SpamModel::ideal(), 0.0).map_err(py_err)?;
    sim::run_protocol(&protocol.0, Truth::State(&state.0), &noise, total_shots, RandomSeed::new(seed)).map(PyCounts).map_err(py_err)
}

/// Maximum-likelihood state estimate; returns the estimate and its log-likelihood.
#[pyfunction]
#[pyo3(signature = (protocol, counts, gate_depol_p = None))]
fn reconstruct_state(protocol: &PyProtocol, counts: &PyCounts, gate_depol_p: Option<f64>) -> PyResult<(PyDensityMatrix, f64)> {
    let model = recon::build_measurement_model(&protocol.0, &SpamAssumption::Ideal, gate_depol_p).map_err(py_err)?;
    let fit = recon::mle_state(&counts.0, &model).map_err(py_err)?;
    Ok((PyDensityMatrix(fit.estimate), fit.log_likelihood))
}

/// Runs an experiment from a JSON config. Returns the rows CSV for
/// `qst_compare` and `qpt_models`, and the JSON report otherwise.
#[pyfunction]
fn run_experiment(config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    cfg.validate().map_err(py_err)?;
    let out = match cfg.experiment {
        Experiment::QstCompare => experiments::rows_csv(&experiments::run_qst_compare(&cfg).map_err(py_err)?),
        Experiment::QptModels => experiments::rows_csv(&experiments::run_qpt_models(&cfg).map_err(py_err)?),
        Experiment::Completeness => experiments::run_completeness(&cfg).map(|v| v.to_string()),
        _ => experiments::run_spam_fits(&cfg).map(|v| v.to_string()),
    };
    out.map_err(py_err)
}

#[pymodule]
fn qudit_tomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyProtocol>()?;
    m.add_class::<PyCounts>()?;
    m.add_function(wrap_pyfunction!(simulate_state, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_state, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
