//! Python bindings for `wait_core`.
//!
//! ```text
//! import wait_eprocess as w
//! s = w.Schedule("wdyadic")
//! batch = w.simulate_running_max(1.0, 1000, 500, seed=7)
//! agg = batch.aggregate(w.Profile(s, batch.max_value()))
//! agg.epower(500)
//! ```

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wait_core::aggregate::{self, AggregateTrajectory, DEFAULT_ETA};
use wait_core::experiments::{self, ExperimentId, RunSettings, DEFAULT_SEED};
use wait_core::gaussian::{self, GaussianBed, Hypothesis, RunningMaxBatch};
use wait_core::montecarlo::{self, MonteCarloConfig, TimeGrid, DEFAULT_BATCH_SIZE};
use wait_core::profile::ProfileTable;
use wait_core::schedules::{LevelSchedule, TABLE_KEYS};
use wait_core::WaitError;

fn py_err(e: WaitError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A level schedule `(alpha_k, w_k)`, built from a key such as `"dyadic"`,
/// `"power:0.5"`, `"logcorr:2:10"`, `"itlog:16"`, `"wdyadic"` or
/// `"fwdyadic:0.5"`.
#[pyclass(name = "Schedule", frozen)]
struct PySchedule {
    inner: LevelSchedule,
}

#[pymethods]
impl PySchedule {
    #[new]
    fn new(key: &str) -> PyResult<Self> {
        Ok(Self { inner: key.parse().map_err(py_err)? })
    }

    /// Schedule from explicit level lists; weights default to 1.
    #[staticmethod]
    #[pyo3(signature = (alphas, weights=None))]
    fn explicit(alphas: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let weights = weights.unwrap_or_else(|| vec![1.0; alphas.len()]);
        Ok(Self { inner: LevelSchedule::explicit(&alphas, &weights).map_err(py_err)? })
    }

    /// Keys of the seven built-in schedules.
    #[staticmethod]
    fn table_keys() -> Vec<&'static str> {
        TABLE_KEYS.to_vec()
    }

    #[getter]
    fn key(&self) -> String {
        self.inner.key()
    }

    #[getter]
    fn definition(&self) -> String {
        self.inner.definition()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.target_rho()
    }

    #[getter]
    fn k_start(&self) -> u64 {
        self.inner.k_start()
    }

    #[getter]
    fn norm_constant(&self) -> f64 {
        self.inner.norm_constant()
    }

    fn alpha(&self, k: u64) -> PyResult<f64> {
        self.inner.alpha(k).map_err(py_err)
    }

    /// `b_k = ln(1 / alpha_k)`.
    fn b(&self, k: u64) -> PyResult<f64> {
        self.inner.b(k).map_err(py_err)
    }

    fn log_weight(&self, k: u64) -> PyResult<f64> {
        self.inner.log_weight(k).map_err(py_err)
    }

    /// `sum_{k <= K} w_k alpha_k`.
    fn partial_budget(&self, k_max: u64) -> PyResult<f64> {
        self.inner.partial_budget(k_max).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Schedule('{}')", self.inner.key())
    }
}

/// Tabulated weight profile `W(x) = sum_{b_k <= x} w_k` on `[0, x_max]`.
#[pyclass(name = "Profile", frozen)]
struct PyProfile {
    inner: ProfileTable,
}

#[pymethods]
impl PyProfile {
    #[new]
    fn new(schedule: &PySchedule, x_max: f64) -> PyResult<Self> {
        Ok(Self { inner: ProfileTable::build(&schedule.inner, x_max).map_err(py_err)? })
    }

    #[getter]
    fn x_max(&self) -> f64 {
        self.inner.x_max()
    }

    fn log_w(&self, x: f64) -> PyResult<f64> {
        self.inner.log_w(x).map_err(py_err)
    }

    /// `ln W(x) / x`.
    fn exponent(&self, x: f64) -> PyResult<f64> {
        self.inner.exponent(x).map_err(py_err)
    }

    fn envelope_slack(&self, x: f64) -> PyResult<f64> {
        self.inner.envelope_slack(x).map_err(py_err)
    }

    /// Number of levels with `b_k <= x` (unweighted schedules only).
    fn counting_n(&self, x: f64) -> PyResult<u64> {
        self.inner.counting_n(x).map_err(py_err)
    }
}

/// Running maxima `H_t` of simulated score paths on a time grid.
#[pyclass(name = "RunningMaxBatch", frozen)]
struct PyRunningMaxBatch {
    inner: RunningMaxBatch,
}

#[pymethods]
impl PyRunningMaxBatch {
    #[getter]
    fn grid(&self) -> Vec<u64> {
        self.inner.grid().points().to_vec()
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.inner.n_paths()
    }

    fn row(&self, path: usize) -> PyResult<Vec<f64>> {
        if path >= self.inner.n_paths() {
            return Err(PyValueError::new_err(format!("path {path} out of {}", self.inner.n_paths())));
        }
        Ok(self.inner.row(path).to_vec())
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.grid().len() {
            return Err(PyValueError::new_err(format!("grid index {j} out of {}", self.inner.grid().len())));
        }
        Ok(self.inner.column(j))
    }

    fn max_value(&self) -> f64 {
        self.inner.max_value()
    }

    fn checksum(&self) -> u64 {
        self.inner.checksum()
    }

    /// `ln M_t = ln W(H_t)` for every path and grid time.
    fn aggregate(&self, profile: &PyProfile) -> PyResult<PyAggregate> {
        let inner = aggregate::aggregate_from_running_max(&profile.inner, &self.inner).map_err(py_err)?;
        Ok(PyAggregate { inner })
    }

    /// First grid time with `H >= b` per ascending threshold, `None` if never.
    fn first_passage(&self, thresholds: Vec<f64>) -> PyResult<Vec<Vec<Option<u64>>>> {
        gaussian::first_passage_batch(&self.inner, &thresholds).map_err(py_err)
    }
}

/// WAIT aggregate trajectories `ln M_t`.
#[pyclass(name = "Aggregate", frozen)]
struct PyAggregate {
    inner: AggregateTrajectory,
}

#[pymethods]
impl PyAggregate {
    #[getter]
    fn grid(&self) -> Vec<u64> {
        self.inner.grid().points().to_vec()
    }

    fn log_m(&self, path: usize) -> PyResult<Vec<f64>> {
        if path >= self.inner.n_paths() {
            return Err(PyValueError::new_err(format!("path {path} out of {}", self.inner.n_paths())));
        }
        Ok(self.inner.row(path).to_vec())
    }

    /// `(mean, se)` of `ln M^(eta)_t / t`.
    fn epower(&self, t: u64) -> PyResult<(f64, f64)> {
        let e = self.inner.epower(t).map_err(py_err)?;
        Ok((e.mean, e.se))
    }

    /// `(mean, se)` of `M_t` at grid index `j`.
    fn linear_mean(&self, j: usize) -> PyResult<(f64, f64)> {
        let e = self.inner.linear_mean(j).map_err(py_err)?;
        Ok((e.mean, e.se))
    }

    /// First grid time with `M_t >= 1 / alpha`.
    fn threshold_time(&self, path: usize, alpha: f64) -> PyResult<Option<u64>> {
        self.inner.threshold_time(path, alpha).map_err(py_err)
    }
}

/// `I = mu^2 / 2`.
#[pyfunction]
fn kl_rate(mu: f64) -> PyResult<f64> {
    gaussian::kl_rate(mu).map_err(py_err)
}

/// `ln(eta + (1 - eta) M)` from `ln M`.
#[pyfunction]
#[pyo3(signature = (log_m, eta=DEFAULT_ETA))]
fn eta_correct(log_m: f64, eta: f64) -> f64 {
    aggregate::eta_correct(log_m, eta)
}

/// Direct indicator sum `ln sum_k w_k 1{tau_k <= t}`.
#[pyfunction]
fn aggregate_brute_force(schedule: &PySchedule, taus: Vec<Option<u64>>, t: u64) -> PyResult<f64> {
    aggregate::aggregate_brute_force(&schedule.inner, &taus, t).map_err(py_err)
}

/// Simulates Gaussian score paths and records their running maxima on
/// `grid` (default: every step).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (mu, n_paths, horizon, grid=None, seed=DEFAULT_SEED, null=false, batch_size=DEFAULT_BATCH_SIZE))]
fn simulate_running_max(
    py: Python<'_>,
    mu: f64,
    n_paths: usize,
    horizon: u64,
    grid: Option<Vec<u64>>,
    seed: u64,
    null: bool,
    batch_size: usize,
) -> PyResult<PyRunningMaxBatch> {
    let hypothesis = if null { Hypothesis::Null } else { Hypothesis::Alternative };
    let bed = GaussianBed::new(mu, hypothesis).map_err(py_err)?;
    let grid = match grid {
        Some(points) => TimeGrid::new(points).map_err(py_err)?,
        None => TimeGrid::full(horizon),
    };
    let config = MonteCarloConfig { n_paths, horizon, batch_size, master_seed: seed };
    let inner = py
        .detach(|| gaussian::simulate_running_max_with(&bed, &config, &grid))
        .map_err(py_err)?;
    Ok(PyRunningMaxBatch { inner })
}

/// The standard time grid of `size` points: `n_linear` equally spaced
/// points, early geometric points and 0.
#[pyfunction]
fn time_grid(horizon: u64, n_linear: usize, size: usize) -> PyResult<Vec<u64>> {
    Ok(montecarlo::grid_with_size(horizon, n_linear, size).map_err(py_err)?.0.points().to_vec())
}

/// Text table of the built-in schedules.
#[pyfunction]
fn schedule_table() -> String {
    wait_core::cli::print_schedule_table()
}

/// Runs one experiment (`"exp1"` to `"exp10"`) and returns a dict with
/// `passed`, `csv`, `params`, `warnings` and `assertions`. Writes the CSV and
/// `summary.json` when `out` is given.
#[pyfunction]
#[pyo3(signature = (name, seed=DEFAULT_SEED, scale=1.0, paths=None, horizon=None, out=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    seed: u64,
    scale: f64,
    paths: Option<usize>,
    horizon: Option<u64>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let id = ExperimentId::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown experiment {name}")))?;
    let settings = RunSettings { seed, scale, paths, horizon, ..RunSettings::default() }
        .validated()
        .map_err(py_err)?;
    let mut results = py.detach(|| experiments::run_experiments(&[id], &settings)).map_err(py_err)?;
    let r = results.pop().expect("one experiment requested");
    if let Some(dir) = out {
        experiments::write_outputs(std::slice::from_ref(&r), &dir).map_err(py_err)?;
    }
    let d = PyDict::new(py);
    d.set_item("experiment", r.id.name())?;
    d.set_item("passed", r.passed())?;
    d.set_item("seed", r.seed)?;
    d.set_item("csv", r.to_csv())?;
    d.set_item("params", r.params.clone())?;
    d.set_item("warnings", r.warnings.clone())?;
    let assertions = r
        .assertions
        .iter()
        .map(|a| {
            let item = PyDict::new(py);
            item.set_item("name", &a.name)?;
            item.set_item("passed", a.passed)?;
            item.set_item("observed", a.observed)?;
            item.set_item("bound", a.bound)?;
            Ok(item)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("assertions", assertions)?;
    Ok(d)
}

#[pymodule]
fn wait_eprocess(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchedule>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyRunningMaxBatch>()?;
    m.add_class::<PyAggregate>()?;
    m.add_function(wrap_pyfunction!(kl_rate, m)?)?;
    m.add_function(wrap_pyfunction!(eta_correct, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_running_max, m)?)?;
    m.add_function(wrap_pyfunction!(time_grid, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    Ok(())
}
