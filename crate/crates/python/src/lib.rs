//! Python bindings. Reports are returned as plain dictionaries.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use nqdreg::estimator::{self, RegressionFunction};
use nqdreg::experiments::reference_config;
use nqdreg::lemma_suite::{self, BandwidthRule, EvalSpec, RiemannMode};
use nqdreg::nqd_errors::{self, ErrorModel};
use nqdreg::weights::{self, CheckParams, ConditionId};
use nqdreg::{config, experiments, kernels};

fn value_error(e: nqdreg::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "DesignGrid", module = "nqdreg_py", frozen)]
struct PyDesignGrid {
    inner: Arc<nqdreg::DesignGrid>,
}

#[pymethods]
impl PyDesignGrid {
    /// Points `k/n`, `k = 1..n`.
    #[staticmethod]
    fn equispaced(n: usize) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(nqdreg::DesignGrid::equispaced(n).map_err(value_error)?) })
    }

    #[new]
    fn new(points: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(nqdreg::DesignGrid::from_points(points).map_err(value_error)?) })
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn mesh(&self) -> f64 {
        self.inner.mesh()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("DesignGrid(n={}, mesh={})", self.inner.len(), self.inner.mesh())
    }
}

#[pyclass(name = "Kernel", module = "nqdreg_py", frozen)]
struct PyKernel {
    inner: kernels::KernelSpec,
}

#[pymethods]
impl PyKernel {
    /// `gaussian`, `epanechnikov` or `signed_gaussian`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self { inner: kernels::KernelSpec::by_name(name).map_err(value_error)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn __call__(&self, u: f64) -> f64 {
        self.inner.evaluate(u)
    }

    fn integral(&self) -> f64 {
        self.inner.integrate()
    }

    fn abs_integral(&self) -> f64 {
        self.inner.integrate_abs()
    }

    /// Boundedness, Lipschitz and integral checks.
    #[pyo3(signature = (grid_resolution = 20_000))]
    fn check_conditions<'py>(&self, py: Python<'py>, grid_resolution: usize) -> PyResult<Bound<'py, PyAny>> {
        let rep = kernels::check_condition_a1_a3(&self.inner, grid_resolution).map_err(value_error)?;
        to_py(py, &rep)
    }
}

#[pyclass(name = "WeightMatrix", module = "nqdreg_py", frozen)]
struct PyWeightMatrix {
    inner: weights::WeightMatrix,
}

#[pymethods]
impl PyWeightMatrix {
    /// Nearest-neighbour weights `1/k` on the `k` closest design points.
    #[staticmethod]
    fn nearest_neighbor(design: &PyDesignGrid, eval_points: Vec<f64>, k: usize) -> PyResult<Self> {
        let inner = weights::nn_weights(Arc::clone(&design.inner), &eval_points, k).map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Priestley–Chao kernel weights with bandwidth `h`.
    #[staticmethod]
    fn priestley_chao(design: &PyDesignGrid, eval_points: Vec<f64>, kernel: &PyKernel, h: f64) -> PyResult<Self> {
        let inner =
            weights::pc_weights(Arc::clone(&design.inner), &eval_points, &kernel.inner, h).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn eval_points(&self) -> Vec<f64> {
        self.inner.eval_points().to_vec()
    }

    fn row(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.m() {
            return Err(PyValueError::new_err(format!("row {j} out of range")));
        }
        Ok(self.inner.row(j).to_vec())
    }

    fn scaled(&self, factor: f64) -> Self {
        Self { inner: self.inner.scaled(factor) }
    }

    /// Evaluates one condition (`B1`..`B4`, `A4`, `S_POWER`, `MAXW`, or a
    /// primed uniform id). Passing `tau` checks the uniform version.
    #[pyo3(signature = (condition, a = None, s = None, tau = None))]
    fn check<'py>(
        &self,
        py: Python<'py>,
        condition: &str,
        a: Option<f64>,
        s: Option<f64>,
        tau: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let id: ConditionId = condition.parse().map_err(value_error)?;
        let params = CheckParams { a, s, ..CheckParams::default() };
        let rep = match tau {
            Some(t) => weights::check_b_uniform(&self.inner, id, &params, t),
            None => weights::check_b(&self.inner, id, &params),
        }
        .map_err(value_error)?;
        to_py(py, &rep)
    }

    /// `Σ_k ω_k y_k` for each row.
    fn smooth(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        estimator::smooth(&self.inner, &values).map_err(value_error)
    }

    /// Deterministic bias of the smoother for a named regression function.
    fn bias(&self, g: &str) -> PyResult<Vec<f64>> {
        let g = RegressionFunction::parse(g).map_err(value_error)?;
        estimator::bias(&g, &self.inner).map_err(value_error)
    }
}

#[pyclass(name = "ErrorModel", module = "nqdreg_py", frozen)]
struct PyErrorModel {
    inner: ErrorModel,
}

#[pymethods]
impl PyErrorModel {
    /// `iid:<marginal>`, `neg_ma1:<θ>`, `gauss_negcorr:<banded|equi>:<ρ>` or
    /// `gauss_corr:<banded|equi>:<ρ>`.
    #[new]
    #[pyo3(signature = (descriptor, variance = 1.0))]
    fn new(descriptor: &str, variance: f64) -> PyResult<Self> {
        let inner = ErrorModel::parse(descriptor).and_then(|m| m.with_variance(variance)).map_err(value_error)?;
        Ok(Self { inner })
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        nqd_errors::sample_errors(&self.inner, n, seed).map_err(value_error)
    }

    fn covariance(&self, i: usize, j: usize) -> f64 {
        self.inner.covariance(i, j)
    }

    /// Empirical quadrant-dependence test over `pairs`.
    #[pyo3(signature = (pairs, sample_size = 100_000, seed = 0, grid = None))]
    fn check_nqd<'py>(
        &self,
        py: Python<'py>,
        pairs: Vec<(usize, usize)>,
        sample_size: usize,
        seed: u64,
        grid: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = &self.inner;
        let rep = py
            .detach(|| nqd_errors::check_nqd(model, &pairs, sample_size, grid.as_deref(), seed))
            .map_err(value_error)?;
        to_py(py, &rep)
    }

    fn verify_lemma22<'py>(
        &self,
        py: Python<'py>,
        ns: Vec<usize>,
        replicates: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = &self.inner;
        let rep = py
            .detach(|| lemma_suite::verify_lemma22(model, &ns, replicates, seed))
            .map_err(value_error)?;
        to_py(py, &rep)
    }
}

/// Kernel Riemann sums along `ladder`; `mode` is `signed` or `abs`, and
/// `tau` switches from the point `x` to the grid on `[tau, 1 - tau]`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (kernel, ladder, mode = "signed", x = 0.5, tau = None, h_scale = 1.0, h_exp = 0.25))]
fn verify_riemann_limits<'py>(
    py: Python<'py>,
    kernel: &PyKernel,
    ladder: Vec<usize>,
    mode: &str,
    x: f64,
    tau: Option<f64>,
    h_scale: f64,
    h_exp: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "signed" => RiemannMode::Signed,
        "abs" => RiemannMode::Abs,
        other => return Err(PyValueError::new_err(format!("mode must be 'signed' or 'abs', got '{other}'"))),
    };
    let eval = match tau {
        Some(tau) => EvalSpec::Interval { tau },
        None => EvalSpec::Point { x },
    };
    let rule = BandwidthRule { scale: h_scale, exponent: h_exp };
    let rep = lemma_suite::verify_riemann_limits(&kernel.inner, rule, &ladder, eval, mode).map_err(value_error)?;
    to_py(py, &rep)
}

/// Runs a convergence experiment described by a TOML document.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config::parse_experiment_config(config_toml).map_err(value_error)?;
    let rep = py.detach(|| experiments::run_experiment(&cfg)).map_err(value_error)?;
    let out = to_py(py, &rep)?;
    out.cast::<PyDict>()?.set_item("pass", rep.pass())?;
    Ok(out)
}

/// The built-in reference configuration for a theorem id, as TOML.
#[pyfunction]
fn reference_config_toml(theorem: &str) -> PyResult<String> {
    let id = theorem.parse().map_err(value_error)?;
    Ok(config::to_toml(&reference_config(id)))
}

/// One simulated estimate `g_n(x_j)` at each evaluation point.
#[pyfunction]
fn estimate(g: &str, weights: &PyWeightMatrix, model: &PyErrorModel, seed: u64) -> PyResult<Vec<f64>> {
    let g = RegressionFunction::parse(g).map_err(value_error)?;
    let sample =
        estimator::simulate_sample(&g, weights.inner.design(), &model.inner, seed).map_err(value_error)?;
    estimator::estimate(&sample, &weights.inner).map_err(value_error)
}

#[pymodule]
fn nqdreg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDesignGrid>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyWeightMatrix>()?;
    m.add_class::<PyErrorModel>()?;
    m.add_function(wrap_pyfunction!(verify_riemann_limits, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(reference_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    Ok(())
}
