//! Python bindings: configuration, single runs, ladders, noise studies and
//! access to the assembled system.

use parasrc::inverse::{self, ExperimentReport, ProblemConfig, Refine};
use parasrc::Error;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SingularSystem { .. } | Error::IllConditioned { .. } | Error::Forward(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Experiment settings. Mesh parameters are denominators.
#[pyclass(name = "Config", module = "parasrc_py", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ProblemConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (example=1, h=10, tau=10, mode="lip", gamma_f=0.0, gamma_u=0.0, delta=0.0, seed=0, omega0=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        example: u8,
        h: usize,
        tau: usize,
        mode: &str,
        gamma_f: f64,
        gamma_u: f64,
        delta: f64,
        seed: u64,
        omega0: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let inner = ProblemConfig {
            example,
            h,
            tau,
            mode: mode.parse().map_err(to_py)?,
            gamma_f,
            gamma_u,
            delta,
            seed,
            omega0,
            ..ProblemConfig::default()
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ProblemConfig::from_toml_str(text).map_err(to_py)? })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Copy with some fields replaced.
    #[pyo3(signature = (h=None, tau=None, delta=None, seed=None))]
    fn with_(&self, h: Option<usize>, tau: Option<usize>, delta: Option<f64>, seed: Option<u64>) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.h = h.unwrap_or(inner.h);
        inner.tau = tau.unwrap_or(inner.tau);
        inner.delta = delta.unwrap_or(inner.delta);
        inner.seed = seed.unwrap_or(inner.seed);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn example(&self) -> u8 {
        self.inner.example
    }
    #[getter]
    fn h(&self) -> usize {
        self.inner.h
    }
    #[getter]
    fn tau(&self) -> usize {
        self.inner.tau
    }
    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("Config(example={}, h={}, tau={}, mode='{}', delta={}, seed={})", c.example, c.h, c.tau, c.mode.as_str(), c.delta, c.seed)
    }
}

/// Result row of one reconstruction.
#[pyclass(name = "Report", module = "parasrc_py", get_all, frozen)]
struct PyReport {
    example: String,
    mode: String,
    h: usize,
    tau: usize,
    delta: f64,
    seed: u64,
    gamma_f: f64,
    gamma_u: f64,
    error: f64,
    resid_h1: f64,
    resid_l2: f64,
    cond: f64,
    relative_residual: f64,
    n_dofs: usize,
    order: Option<f64>,
    warning: Option<String>,
    csv_row: String,
}

impl From<&ExperimentReport> for PyReport {
    fn from(r: &ExperimentReport) -> Self {
        Self {
            example: r.example.clone(),
            mode: r.mode.as_str().to_string(),
            h: r.h,
            tau: r.tau,
            delta: r.delta,
            seed: r.seed,
            gamma_f: r.gamma_f,
            gamma_u: r.gamma_u,
            error: r.error,
            resid_h1: r.resid_h1,
            resid_l2: r.resid_l2,
            cond: r.cond,
            relative_residual: r.relative_residual,
            n_dofs: r.n_dofs,
            order: r.order,
            warning: r.warning.clone(),
            csv_row: r.csv_row(false),
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!("Report(example='{}', mode='{}', h=1/{}, tau=1/{}, error={:.4e})", self.example, self.mode, self.h, self.tau, self.error)
    }
}

/// Factorized system for one configuration; repeated runs with new noise
/// only reassemble the load.
#[pyclass(name = "Reconstructor", module = "parasrc_py", frozen)]
struct PyReconstructor {
    inner: inverse::Reconstructor,
}

#[pymethods]
impl PyReconstructor {
    #[new]
    fn new(py: Python<'_>, config: PyConfig) -> PyResult<Self> {
        let cfg = config.inner;
        let inner = py
            .detach(|| cfg.problem().and_then(|p| inverse::Reconstructor::new(p, &cfg)))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Returns the report and the P1 coefficients of the reconstructed source.
    fn run(&self, py: Python<'_>, delta: f64, seed: u64) -> PyResult<(PyReport, Vec<f64>)> {
        let r = py.detach(|| self.inner.run(delta, seed)).map_err(to_py)?;
        Ok((PyReport::from(&r.report), r.f.coeffs))
    }

    #[getter]
    fn condition(&self) -> f64 {
        self.inner.condition().value
    }

    #[getter]
    fn n_dofs(&self) -> usize {
        self.inner.system.dim()
    }

    /// `(rows, cols, values)` of the stored matrix entries.
    fn matrix_coo(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let m = &self.inner.system.matrix;
        let mut rows = Vec::with_capacity(m.nnz());
        for i in 0..m.n_rows {
            rows.extend(std::iter::repeat_n(i, m.row_ptr[i + 1] - m.row_ptr[i]));
        }
        (rows, m.col_idx.clone(), m.values.clone())
    }

    fn rhs(&self) -> Vec<f64> {
        self.inner.system.rhs.clone()
    }
}

#[pyfunction]
fn run(py: Python<'_>, config: PyConfig) -> PyResult<PyReport> {
    let r = py.detach(|| inverse::run_reconstruction(&config.inner)).map_err(to_py)?;
    Ok(PyReport::from(&r))
}

/// Runs every configuration and fills in observed orders against `refine`
/// (`"joint"`, `"space"` or `"time"`).
#[pyfunction]
#[pyo3(signature = (configs, refine="joint"))]
fn ladder(py: Python<'_>, configs: Vec<PyConfig>, refine: &str) -> PyResult<Vec<PyReport>> {
    let refine = match refine {
        "joint" => Refine::Joint,
        "space" => Refine::Space,
        "time" => Refine::Time,
        _ => return Err(PyValueError::new_err(format!("unknown refinement `{refine}`"))),
    };
    let cfgs: Vec<ProblemConfig> = configs.into_iter().map(|c| c.inner).collect();
    let reports = py.detach(|| inverse::convergence_study(&cfgs, refine)).map_err(to_py)?;
    Ok(reports.iter().map(PyReport::from).collect())
}

/// Seed-averaged errors for each noise level and the fitted log-log slope.
#[pyfunction]
fn noise_study(py: Python<'_>, config: PyConfig, deltas: Vec<f64>, seeds: Vec<u64>) -> PyResult<(Vec<f64>, f64)> {
    let s = py.detach(|| inverse::delta_study(&config.inner, &deltas, &seeds)).map_err(to_py)?;
    Ok((s.mean_errors, s.slope))
}

#[pyfunction]
fn convergence_rates(errors: Vec<f64>, params: Vec<f64>) -> PyResult<Vec<Option<f64>>> {
    if errors.len() != params.len() {
        return Err(PyValueError::new_err("errors and params differ in length"));
    }
    Ok(inverse::convergence_rates(&errors, &params))
}

#[pymodule]
fn parasrc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyReconstructor>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(ladder, m)?)?;
    m.add_function(wrap_pyfunction!(noise_study, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_rates, m)?)?;
    m.add("CSV_HEADER", inverse::CSV_HEADER)?;
    Ok(())
}
