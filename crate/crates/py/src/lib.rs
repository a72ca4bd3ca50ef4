//! Python bindings for the catastrophe toolkit.
//!
//! Log probabilities are returned as plain floats (natural log). Invalid
//! inputs raise `ValueError`; truncation and overflow failures raise
//! `RuntimeError`.

use catastrophe_core as core;
use catastrophe_core::lab::{self, IsEstimate};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Truncation { .. } | core::Error::ProductOverflow { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Rates `lambda` (up), `mu` (catastrophe) and clock intensity `alpha`.
#[pyclass(
    frozen,
    skip_from_py_object,
    name = "ModelParams",
    module = "catastrophe"
)]
#[derive(Clone, Copy)]
struct PyModelParams(core::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (lambda_, mu, alpha))]
    fn new(lambda_: f64, mu: f64, alpha: f64) -> PyResult<Self> {
        core::ModelParams::new(lambda_, mu, alpha)
            .map(PyModelParams)
            .map_err(to_py)
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn p_up(&self) -> f64 {
        self.0.p_up()
    }

    #[getter]
    fn rate_up(&self) -> f64 {
        self.0.rate_up()
    }

    #[getter]
    fn rate_catastrophe(&self) -> f64 {
        self.0.rate_catastrophe()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(lambda_={}, mu={}, alpha={})",
            self.0.lambda(),
            self.0.mu(),
            self.0.alpha()
        )
    }
}

/// Space scale `phi(T) = b T^a`.
#[pyclass(
    frozen,
    skip_from_py_object,
    name = "ScalingSpec",
    module = "catastrophe"
)]
#[derive(Clone, Copy)]
struct PyScalingSpec(core::ScalingSpec);

#[pymethods]
impl PyScalingSpec {
    #[new]
    fn new(b: f64, a: f64) -> PyResult<Self> {
        core::ScalingSpec::new(b, a)
            .map(PyScalingSpec)
            .map_err(to_py)
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }

    /// "sublinear", "linear" or "superlinear".
    #[getter]
    fn regime(&self) -> &'static str {
        match self.0.regime() {
            core::Regime::Sublinear => "sublinear",
            core::Regime::Linear { .. } => "linear",
            core::Regime::Superlinear => "superlinear",
        }
    }

    fn phi(&self, t: f64) -> f64 {
        self.0.phi(t)
    }

    fn psi(&self, t: f64) -> PyResult<f64> {
        self.0.psi(t).map_err(to_py)
    }

    /// Rate function of this regime evaluated at `x`.
    fn rate(&self, params: &PyModelParams, x: f64) -> f64 {
        core::RegimeRateFunction::for_spec(&self.0, &params.0)
            .eval(x)
            .value()
    }

    fn __repr__(&self) -> String {
        format!("ScalingSpec(b={}, a={})", self.0.b(), self.0.a())
    }
}

/// Path as `[(time, state), ...]`, starting with `(0.0, init)`.
#[pyfunction]
#[pyo3(signature = (params, horizon, init=0, seed=0, sampler="embedded"))]
fn simulate(
    py: Python<'_>,
    params: &PyModelParams,
    horizon: f64,
    init: u64,
    seed: u64,
    sampler: &str,
) -> PyResult<Vec<(f64, u64)>> {
    let p = params.0;
    let traj = match sampler {
        "embedded" => py.detach(|| core::simulate_embedded(&p, horizon, init, seed)),
        "decomposed" => py.detach(|| core::simulate_decomposed(&p, horizon, init, seed)),
        other => {
            return Err(PyValueError::new_err(format!(
                "sampler must be 'embedded' or 'decomposed' (got {other:?})"
            )))
        }
    }
    .map_err(to_py)?;
    let mut out = vec![(0.0, traj.initial_state)];
    out.extend(traj.events);
    Ok(out)
}

fn solve(
    py: Python<'_>,
    params: &PyModelParams,
    t: f64,
    init: usize,
    n_states: Option<usize>,
    tol: f64,
    threshold: u64,
) -> PyResult<core::DistributionVector> {
    let p = params.0;
    let n = n_states.unwrap_or_else(|| core::default_n_states(&p, t, threshold.max(init as u64)));
    py.detach(|| core::transient_distribution(&p, t, init, n, tol))
        .map_err(to_py)
}

/// Probabilities `P(xi(t) = j)` for `j < n_states`.
#[pyfunction]
#[pyo3(signature = (params, t, init=0, n_states=None, tol=1e-12))]
fn transient_distribution(
    py: Python<'_>,
    params: &PyModelParams,
    t: f64,
    init: usize,
    n_states: Option<usize>,
    tol: f64,
) -> PyResult<Vec<f64>> {
    Ok(solve(py, params, t, init, n_states, tol, 0)?.probabilities())
}

/// `log P(xi(t) >= threshold)`.
#[pyfunction]
#[pyo3(signature = (params, t, threshold, init=0, n_states=None, tol=1e-12))]
fn log_tail_probability(
    py: Python<'_>,
    params: &PyModelParams,
    t: f64,
    threshold: usize,
    init: usize,
    n_states: Option<usize>,
    tol: f64,
) -> PyResult<f64> {
    let dist = solve(py, params, t, init, n_states, tol, threshold as u64)?;
    core::tail_probability(&dist, threshold)
        .map(|lp| lp.value())
        .map_err(to_py)
}

#[pyfunction]
fn rate_i1(params: &PyModelParams, x: f64) -> f64 {
    core::rate_i1(x, &params.0).value()
}

#[pyfunction]
fn rate_jk(params: &PyModelParams, x: f64, k: f64) -> f64 {
    core::rate_jk(x, &params.0, k).value()
}

#[pyfunction]
fn rate_i2(x: f64) -> f64 {
    core::rate_i2(x).value()
}

#[pyfunction]
fn rate_poisson_window(params: &PyModelParams, x: f64, c: f64) -> f64 {
    core::rate_poisson_window(x, &params.0, c).value()
}

/// Log of the Poisson lower-tail bound.
#[pyfunction]
fn poisson_lower_tail_bound(beta: f64, z: f64, u: f64) -> PyResult<f64> {
    core::poisson_lower_tail_bound(beta, z, u)
        .map(|lp| lp.value())
        .map_err(to_py)
}

/// Log of the bound on a sum of uniform catastrophe sizes.
#[pyfunction]
fn catastrophe_sum_bound(a: f64, v: f64, delta: f64, phi_t: f64) -> PyResult<f64> {
    core::catastrophe_sum_bound(a, v, delta, phi_t)
        .map(|lp| lp.value())
        .map_err(to_py)
}

/// Coupled pair as `[(time, x, y), ...]`, starting with `(0.0, x0, y0)`.
#[pyfunction]
#[pyo3(signature = (params, x0, y0, horizon, seed=0))]
fn simulate_coupled(
    py: Python<'_>,
    params: &PyModelParams,
    x0: u64,
    y0: u64,
    horizon: f64,
    seed: u64,
) -> PyResult<Vec<(f64, u64, u64)>> {
    let p = params.0;
    let ct = py
        .detach(|| core::simulate_coupled(&p, x0, y0, horizon, seed))
        .map_err(to_py)?;
    let mut out = vec![(0.0, x0, y0)];
    out.extend(ct.events);
    Ok(out)
}

/// Largest `|x - y|` along a coupled path from [`simulate_coupled`].
#[pyfunction]
fn max_discrepancy(path: Vec<(f64, u64, u64)>) -> u64 {
    path.iter()
        .map(|&(_, x, y)| x.abs_diff(y))
        .max()
        .unwrap_or(0)
}

/// One dict per horizon with keys `T, psi, threshold, log_tail, normalized,
/// truncation_certificate, conservation_error, n_states`.
#[pyfunction]
#[pyo3(signature = (params, spec, x, t_grid, tol=1e-12))]
fn empirical_rate_curve<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    spec: &PyScalingSpec,
    x: f64,
    t_grid: Vec<f64>,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let (p, s) = (params.0, spec.0);
    let result = py
        .detach(|| core::empirical_rate_curve(&p, &s, x, &t_grid, tol))
        .map_err(to_py)?;
    result
        .points
        .iter()
        .map(|pt| {
            let d = PyDict::new(py);
            d.set_item("T", pt.t)?;
            d.set_item("psi", pt.psi)?;
            d.set_item("threshold", pt.threshold)?;
            d.set_item("log_tail", pt.log_tail)?;
            d.set_item("normalized", pt.normalized)?;
            d.set_item("truncation_certificate", pt.truncation_certificate)?;
            d.set_item("conservation_error", pt.conservation_error)?;
            d.set_item("n_states", pt.n_states)?;
            Ok(d)
        })
        .collect()
}

/// `(log_lower, log_upper)` around `log P(xi(T) >= ceil(x phi(T)))`.
#[pyfunction]
fn ldp_sandwich(
    params: &PyModelParams,
    spec: &PyScalingSpec,
    x: f64,
    t: f64,
) -> PyResult<(f64, f64)> {
    let s = core::ldp_sandwich(&params.0, &spec.0, x, t).map_err(to_py)?;
    Ok((s.lower.value(), s.upper.value()))
}

/// Dict with `log_estimate, rel_std_err, samples, hits`.
#[pyfunction]
#[pyo3(signature = (params, spec, x, t, n, seed=0))]
fn is_estimate_tail<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    spec: &PyScalingSpec,
    x: f64,
    t: f64,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (p, s) = (params.0, spec.0);
    let e: IsEstimate = py
        .detach(|| lab::is_estimate_tail(&p, &s, x, t, n, seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("log_estimate", e.estimate.value())?;
    d.set_item("rel_std_err", e.rel_std_err)?;
    d.set_item("samples", e.samples)?;
    d.set_item("hits", e.hits)?;
    Ok(d)
}

/// Fraction of paths whose running maximum over `[0, T]` exceeds `eps phi(T)`.
#[pyfunction]
#[pyo3(signature = (params, spec, t, eps, n, seed=0))]
fn lln_sup_check(
    py: Python<'_>,
    params: &PyModelParams,
    spec: &PyScalingSpec,
    t: f64,
    eps: f64,
    n: usize,
    seed: u64,
) -> PyResult<f64> {
    let (p, s) = (params.0, spec.0);
    py.detach(|| core::lln_sup_check(&p, &s, t, eps, n, seed))
        .map_err(to_py)
}

#[pymodule]
fn catastrophe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyScalingSpec>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(transient_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(log_tail_probability, m)?)?;
    m.add_function(wrap_pyfunction!(rate_i1, m)?)?;
    m.add_function(wrap_pyfunction!(rate_jk, m)?)?;
    m.add_function(wrap_pyfunction!(rate_i2, m)?)?;
    m.add_function(wrap_pyfunction!(rate_poisson_window, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_lower_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(catastrophe_sum_bound, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_coupled, m)?)?;
    m.add_function(wrap_pyfunction!(max_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rate_curve, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(is_estimate_tail, m)?)?;
    m.add_function(wrap_pyfunction!(lln_sup_check, m)?)?;
    Ok(())
}
