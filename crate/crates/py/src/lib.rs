use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use psit_core::calculus;
use psit_core::config::{parse_config, Mode, DEFAULT_SEED};
use psit_core::grid::{self, PathEnsemble, RngSpec, SamplePath};
use psit_core::psit::{self as core_psit, ProcessOnB, StoppingTime};
use psit_core::scenario;
use psit_core::verify::{self, VerifyOptions};

fn py_err(e: psit_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "TimeGrid", frozen)]
struct PyTimeGrid(grid::TimeGrid);

#[pymethods]
impl PyTimeGrid {
    #[new]
    fn new(horizon: f64, steps: usize) -> PyResult<Self> {
        grid::make_grid(horizon, steps).map(PyTimeGrid).map_err(py_err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }

    fn times(&self) -> Vec<f64> {
        self.0.times()
    }

    fn __repr__(&self) -> String {
        format!("TimeGrid(horizon={}, steps={})", self.0.horizon(), self.0.steps())
    }
}

/// Predictable set of interval type, one section `[0, T]` or `[0, T)` per path.
#[pyclass(name = "Psit", frozen)]
struct PyPsit(core_psit::Psit);

#[pymethods]
impl PyPsit {
    /// `debut[p]` is the grid index of the debut; `closed[p]` keeps it in the set.
    #[new]
    fn new(grid: &PyTimeGrid, debut: Vec<usize>, closed: Vec<bool>) -> PyResult<Self> {
        core_psit::Psit::new(grid.0, debut, closed).map(PyPsit).map_err(py_err)
    }

    #[staticmethod]
    fn full(grid: &PyTimeGrid, n_paths: usize) -> Self {
        PyPsit(core_psit::Psit::full(grid.0, n_paths))
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.0.n_paths()
    }

    fn last_index(&self, path: usize) -> PyResult<usize> {
        check_path(path, self.0.n_paths())?;
        Ok(self.0.last_index(path))
    }

    fn contains(&self, path: usize, k: usize) -> PyResult<bool> {
        check_path(path, self.0.n_paths())?;
        Ok(self.0.contains(path, k))
    }
}

fn check_path(path: usize, n: usize) -> PyResult<()> {
    if path < n {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("path {path} out of range for {n} paths")))
    }
}

/// Process restricted to a predictable set.
#[pyclass(name = "Process", frozen)]
struct PyProcess(ProcessOnB);

#[pymethods]
impl PyProcess {
    /// `values` holds one full-grid row per path; `jumps` lists jump indices.
    #[new]
    #[pyo3(signature = (psit, values, jumps=None))]
    fn new(psit: &PyPsit, values: Vec<Vec<f64>>, jumps: Option<Vec<Vec<usize>>>) -> PyResult<Self> {
        let g = psit.0.grid();
        let jumps = jumps.unwrap_or_else(|| vec![Vec::new(); values.len()]);
        if jumps.len() != values.len() {
            return Err(PyValueError::new_err("values and jumps cover different numbers of paths"));
        }
        let paths = values
            .into_iter()
            .zip(jumps)
            .map(|(v, j)| SamplePath::new(g, v, j))
            .collect::<psit_core::Result<Vec<_>>>()
            .map_err(py_err)?;
        let ens = PathEnsemble::new(g, paths).map_err(py_err)?;
        core_psit::restrict(&ens, &psit.0).map(PyProcess).map_err(py_err)
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.0.n_paths()
    }

    #[getter]
    fn psit(&self) -> PyPsit {
        PyPsit(self.0.psit().clone())
    }

    /// Values on the path's section of the set.
    fn section(&self, path: usize) -> PyResult<Vec<f64>> {
        check_path(path, self.0.n_paths())?;
        Ok(self.0.section(path).to_vec())
    }

    fn jump_marks(&self, path: usize) -> PyResult<Vec<usize>> {
        check_path(path, self.0.n_paths())?;
        Ok(self.0.section_marks(path).to_vec())
    }

    fn terminal(&self, path: usize) -> PyResult<f64> {
        check_path(path, self.0.n_paths())?;
        Ok(self.0.terminal(path))
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs_on_b()
    }

    fn max_abs_diff(&self, other: &PyProcess) -> PyResult<f64> {
        same_set(&self.0, &other.0)?;
        Ok(self.0.max_abs_diff_on_b(&other.0))
    }

    fn __add__(&self, other: &PyProcess) -> PyResult<PyProcess> {
        self.0.add(&other.0).map(PyProcess).map_err(py_err)
    }

    fn __sub__(&self, other: &PyProcess) -> PyResult<PyProcess> {
        self.0.sub(&other.0).map(PyProcess).map_err(py_err)
    }

    fn __mul__(&self, other: &PyProcess) -> PyResult<PyProcess> {
        self.0.mul(&other.0).map(PyProcess).map_err(py_err)
    }

    fn scale(&self, c: f64) -> PyProcess {
        PyProcess(self.0.scale(c))
    }
}

fn same_set(a: &ProcessOnB, b: &ProcessOnB) -> PyResult<()> {
    if a.psit().same_section(b.psit()) {
        Ok(())
    } else {
        Err(PyValueError::new_err("processes live on different sets"))
    }
}

/// Standard Brownian paths on the full set.
#[pyfunction]
#[pyo3(signature = (grid, n_paths, seed=DEFAULT_SEED))]
fn brownian(grid: &PyTimeGrid, n_paths: usize, seed: u64) -> PyResult<PyProcess> {
    let w = grid::gen_brownian(grid.0, n_paths, RngSpec::new(seed)).map_err(py_err)?;
    core_psit::restrict(&w, &core_psit::Psit::full(grid.0, n_paths)).map(PyProcess).map_err(py_err)
}

#[pyfunction]
fn stoch_integral(h: &PyProcess, x: &PyProcess) -> PyResult<PyProcess> {
    calculus::stoch_integral(&h.0, &x.0).map(|r| PyProcess(r.process)).map_err(py_err)
}

#[pyfunction]
fn ls_integral(h: &PyProcess, a: &PyProcess) -> PyResult<PyProcess> {
    calculus::ls_integral(&h.0, &a.0).map(|r| PyProcess(r.process)).map_err(py_err)
}

#[pyfunction]
fn martingale_integral(h: &PyProcess, m: &PyProcess) -> PyResult<PyProcess> {
    calculus::martingale_integral(&h.0, &m.0).map(|r| PyProcess(r.process)).map_err(py_err)
}

/// `[X, Y]` split into `total`, `initial`, `continuous` and `jump` parts.
#[pyfunction]
fn quad_covar(x: &PyProcess, y: &PyProcess) -> PyResult<BTreeMap<&'static str, PyProcess>> {
    let q = calculus::quad_covar(&x.0, &y.0).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("total", PyProcess(q.total)),
        ("initial", PyProcess(q.initial)),
        ("continuous", PyProcess(q.continuous)),
        ("jump", PyProcess(q.jump)),
    ]))
}

#[pyfunction]
fn ibp_residual(x: &PyProcess, y: &PyProcess) -> PyResult<PyProcess> {
    calculus::ibp_residual(&x.0, &y.0).map(PyProcess).map_err(py_err)
}

#[pyfunction]
fn left_limits(x: &PyProcess) -> PyProcess {
    PyProcess(calculus::left_limits(&x.0))
}

#[pyfunction]
fn jumps(x: &PyProcess) -> PyProcess {
    PyProcess(calculus::jumps(&x.0))
}

#[pyfunction]
fn stoch_exp(z: &PyProcess, s0: f64) -> PyResult<PyProcess> {
    calculus::stoch_exp(&z.0, s0).map(PyProcess).map_err(py_err)
}

/// `X` stopped at the per-path grid indices `tau`, kept on the set of `X`.
#[pyfunction]
fn stop(x: &PyProcess, tau: Vec<usize>) -> PyResult<PyProcess> {
    let stopped = core_psit::stop(&x.0, &StoppingTime::new(tau)).map_err(py_err)?;
    core_psit::restrict(&stopped, x.0.psit()).map(PyProcess).map_err(py_err)
}

/// Runs the verification suite; returns `(all_passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (seed=DEFAULT_SEED, filter=None))]
fn run_verify(py: Python<'_>, seed: u64, filter: Option<String>) -> (bool, String) {
    let report = py.detach(|| verify::run_verify(&VerifyOptions { seed, filter, ..Default::default() }));
    (report.all_passed(), report.to_json())
}

/// Runs a finance or simulate scenario given as TOML text; returns the output
/// files by name.
#[pyfunction]
fn run_scenario(py: Python<'_>, config: &str) -> PyResult<BTreeMap<String, String>> {
    let cfg = parse_config(config).map_err(py_err)?;
    let artifacts = py.detach(|| match cfg.mode {
        Mode::Finance => scenario::run_finance(&cfg).map_err(py_err),
        Mode::Simulate => scenario::run_simulate(&cfg).map_err(py_err),
        Mode::Verify => Err(PyValueError::new_err("verify mode: use run_verify")),
    });
    Ok(artifacts?.files.into_iter().collect())
}

#[pymodule]
fn psit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTimeGrid>()?;
    m.add_class::<PyPsit>()?;
    m.add_class::<PyProcess>()?;
    m.add_function(wrap_pyfunction!(brownian, m)?)?;
    m.add_function(wrap_pyfunction!(stoch_integral, m)?)?;
    m.add_function(wrap_pyfunction!(ls_integral, m)?)?;
    m.add_function(wrap_pyfunction!(martingale_integral, m)?)?;
    m.add_function(wrap_pyfunction!(quad_covar, m)?)?;
    m.add_function(wrap_pyfunction!(ibp_residual, m)?)?;
    m.add_function(wrap_pyfunction!(left_limits, m)?)?;
    m.add_function(wrap_pyfunction!(jumps, m)?)?;
    m.add_function(wrap_pyfunction!(stoch_exp, m)?)?;
    m.add_function(wrap_pyfunction!(stop, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
