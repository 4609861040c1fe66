//! Python bindings: parameter models, steady state, covariance matrices,
//! logarithmic negativity and sweeps.

use nalgebra::Matrix4;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use omm_core::experiments::{self, AxisUnit, SearchOptions, SweepAxis, SweepParam};
use omm_core::linear::Mat8;
use omm_core::{BipartiteCM, Complex64, CovarianceMatrix, Error, ModePair, PhysicalParams, ValidatedModel};

create_exception!(omm, NumericalError, PyRuntimeError, "A numerical procedure failed or the system is unstable.");

fn to_py(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn pairs_from(pairs: Option<Vec<String>>) -> PyResult<Vec<ModePair>> {
    match pairs {
        None => Ok(ModePair::REPORTED.to_vec()),
        Some(p) => p.iter().map(|s| s.parse().map_err(to_py)).collect(),
    }
}

fn matrix_from(rows: Vec<Vec<f64>>) -> PyResult<Mat8> {
    if rows.len() != 8 || rows.iter().any(|r| r.len() != 8) {
        return Err(PyValueError::new_err("covariance matrix must be 8x8"));
    }
    Ok(Mat8::from_fn(|i, j| rows[i][j]))
}

fn rows_of(v: &CovarianceMatrix) -> Vec<Vec<f64>> {
    let m = v.matrix();
    (0..8).map(|i| (0..8).map(|j| m[(i, j)]).collect()).collect()
}

/// A validated parameter set; all frequencies in rad/s.
#[pyclass(name = "Model", frozen, from_py_object)]
#[derive(Clone)]
struct PyModel(ValidatedModel);

#[pymethods]
impl PyModel {
    /// Parses a JSON parameter document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let params: PhysicalParams = serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("invalid parameter document: {e}")))?;
        params.validate().map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn baseline() -> Self {
        Self(experiments::presets::baseline())
    }

    /// Copy with one sweepable parameter replaced by an absolute value.
    fn with_value(&self, name: &str, value: f64) -> PyResult<Self> {
        let param: SweepParam = name.parse().map_err(to_py)?;
        let mut m = self.0.clone();
        experiments::apply(&mut m, param, value).map_err(to_py)?;
        Ok(Self(m))
    }

    #[getter]
    fn omega_b(&self) -> f64 {
        self.0.omega_b
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.0.temperature
    }

    #[getter]
    fn n_atoms(&self) -> Option<f64> {
        self.0.n_atoms
    }

    fn __repr__(&self) -> String {
        format!("Model(omega_b={:e}, T={})", self.0.omega_b, self.0.temperature)
    }
}

/// Classical steady state and excitation numbers as a dict.
#[pyfunction]
fn steady_state<'py>(py: Python<'py>, model: &PyModel) -> PyResult<Bound<'py, PyDict>> {
    let ss = omm_core::solve_steady_state(&model.0).map_err(to_py)?;
    let rep = omm_core::excitation_numbers(&ss, &model.0);
    let d = PyDict::new(py);
    let amps: [(&str, Complex64); 5] = [
        ("amp_a", ss.amp_a),
        ("amp_c", ss.amp_c),
        ("amp_m", ss.amp_m),
        ("G_c", ss.coupling_c),
        ("G_m", ss.coupling_m),
    ];
    for (k, z) in amps {
        d.set_item(k, z)?;
    }
    d.set_item("q_mean", ss.q_mean)?;
    d.set_item("delta_c_eff", ss.delta_c_eff)?;
    d.set_item("delta_m_eff", ss.delta_m_eff)?;
    d.set_item("iterations", ss.iterations)?;
    d.set_item("magnons", rep.magnons)?;
    d.set_item("atoms", rep.atoms)?;
    d.set_item("magnon_ratio", rep.magnon_ratio)?;
    d.set_item("atom_ratio", rep.atom_ratio)?;
    Ok(d)
}

/// `(stable, margin)` where margin is the largest real part of the drift spectrum.
#[pyfunction]
fn stability(model: &PyModel) -> PyResult<(bool, f64)> {
    let ss = omm_core::solve_steady_state(&model.0).map_err(to_py)?;
    let a = omm_core::build_drift(&ss, &model.0).map_err(to_py)?;
    let st = omm_core::is_stable(&a).map_err(to_py)?;
    Ok((st.stable, st.margin))
}

/// Steady covariance matrix as 8 rows of 8 floats.
#[pyfunction]
fn covariance(model: &PyModel) -> PyResult<Vec<Vec<f64>>> {
    let m = &model.0;
    let ss = omm_core::solve_steady_state(m).map_err(to_py)?;
    let a = omm_core::build_drift(&ss, m).map_err(to_py)?;
    let d = omm_core::build_diffusion(m, m.temperature).map_err(to_py)?;
    let v = omm_core::solve_lyapunov(&a, &d).map_err(to_py)?;
    Ok(rows_of(&v))
}

/// Logarithmic negativity of `pair` (e.g. "am") in an 8x8 covariance matrix.
#[pyfunction]
fn log_negativity(cm: Vec<Vec<f64>>, pair: &str) -> PyResult<f64> {
    let v = CovarianceMatrix::new(matrix_from(cm)?);
    let pair: ModePair = pair.parse().map_err(to_py)?;
    let n = omm_core::log_negativity(&omm_core::reduced_cm(&v, pair).map_err(to_py)?).map_err(to_py)?;
    Ok(n.value)
}

/// Logarithmic negativity of a 4x4 two-mode covariance matrix.
#[pyfunction]
fn two_mode_log_negativity(cm: Vec<Vec<f64>>) -> PyResult<f64> {
    if cm.len() != 4 || cm.iter().any(|r| r.len() != 4) {
        return Err(PyValueError::new_err("two-mode covariance matrix must be 4x4"));
    }
    let m = Matrix4::from_fn(|i, j| cm[i][j]);
    Ok(omm_core::log_negativity(&BipartiteCM::new(m)).map_err(to_py)?.value)
}

/// Symplectic eigenvalues of an 8x8 covariance matrix, ascending.
#[pyfunction]
fn symplectic_eigenvalues(cm: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    CovarianceMatrix::new(matrix_from(cm)?)
        .symplectic_eigenvalues()
        .map_err(to_py)
}

/// E_N for each requested pair; raises `NumericalError` when unstable.
#[pyfunction]
#[pyo3(signature = (model, pairs=None))]
fn entanglement(model: &PyModel, pairs: Option<Vec<String>>) -> PyResult<Vec<(String, f64)>> {
    let pairs = pairs_from(pairs)?;
    let ev = experiments::evaluate(&model.0, &pairs).map_err(to_py)?;
    let report = ev.entanglement.ok_or_else(|| {
        NumericalError::new_err(format!("drift matrix is unstable (margin {:e})", ev.stability.margin))
    })?;
    Ok(report.entries.iter().map(|(p, n)| (p.label(), n.value)).collect())
}

fn axis(spec: (String, f64, f64, usize, String)) -> PyResult<SweepAxis> {
    let (name, start, stop, count, unit) = spec;
    let param: SweepParam = name.parse().map_err(to_py)?;
    let unit: AxisUnit = unit.parse().map_err(to_py)?;
    SweepAxis::new(param, start, stop, count, unit).map_err(to_py)
}

/// Two-dimensional sweep; each axis is `(name, start, stop, count, unit)`.
/// Returns the CSV table.
#[pyfunction]
#[pyo3(signature = (model, axis1, axis2, pairs=None))]
fn sweep2d(
    py: Python<'_>,
    model: &PyModel,
    axis1: (String, f64, f64, usize, String),
    axis2: (String, f64, f64, usize, String),
    pairs: Option<Vec<String>>,
) -> PyResult<String> {
    let (a1, a2, pairs) = (axis(axis1)?, axis(axis2)?, pairs_from(pairs)?);
    let m = model.0.clone();
    let res = py
        .detach(move || experiments::sweep2d(&m, a1, a2, &pairs))
        .map_err(to_py)?;
    Ok(res.to_csv())
}

/// E_am versus temperature in kelvin; returns the CSV table.
#[pyfunction]
fn temperature_sweep(py: Python<'_>, model: &PyModel, start: f64, stop: f64, count: usize) -> PyResult<String> {
    let ax = SweepAxis::new(SweepParam::Temperature, start, stop, count, AxisUnit::Absolute).map_err(to_py)?;
    let m = model.0.clone();
    let res = py.detach(move || experiments::temperature_sweep(&m, ax)).map_err(to_py)?;
    Ok(res.to_csv())
}

/// `(Δ̃_c^opt / ω_b or None, E_am^max)` at fixed `G_m/2π` in Hz.
#[pyfunction]
fn optimal_detuning(py: Python<'_>, model: &PyModel, coupling_m_hz: f64) -> PyResult<(Option<f64>, f64)> {
    let m = model.0.clone();
    let r = py
        .detach(move || {
            experiments::optimal_cavity_detuning(&m, std::f64::consts::TAU * coupling_m_hz, &SearchOptions::default())
        })
        .map_err(to_py)?;
    Ok((r.delta_c_opt.map(|x| x / model.0.omega_b), r.e_am_max))
}

#[pymodule]
fn omm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(log_negativity, m)?)?;
    m.add_function(wrap_pyfunction!(two_mode_log_negativity, m)?)?;
    m.add_function(wrap_pyfunction!(symplectic_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(entanglement, m)?)?;
    m.add_function(wrap_pyfunction!(sweep2d, m)?)?;
    m.add_function(wrap_pyfunction!(temperature_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_detuning, m)?)?;
    Ok(())
}
