//! Python bindings for the `qpde` pricing simulator.
//!
//! Results are returned as plain dictionaries and lists whose keys follow the
//! JSON summaries written by the `qpde` command-line tool.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

use qpde::classical_baselines::{bs_analytic, OptionKind};
use qpde::pipeline::{run_bs1d, run_heston_scan, Bs1dSetup, HestonSetup};
use qpde::resource_estimator::{quantum_cost, CostModel, ResourceQuery};
use qpde::smile_toolkit::{fit_ssvi, QuoteWeights, SmileSlice, DEFAULT_EPS_CONS};

fn to_py_err(e: qpde::Error) -> PyErr {
    match e {
        qpde::Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Analytic Black–Scholes price of a European call (`put=True` for a put).
#[pyfunction]
#[pyo3(signature = (s, k, r, sigma, t, put = false))]
fn bs_price(s: f64, k: f64, r: f64, sigma: f64, t: f64, put: bool) -> PyResult<f64> {
    let kind = if put { OptionKind::Put } else { OptionKind::Call };
    bs_analytic(s, k, r, sigma, t, kind).map_err(to_py_err)
}

/// One-asset Black–Scholes call priced by the Schrödingerised solver,
/// implicit Euler, the matrix exponential and the analytic formula.
#[pyfunction]
#[pyo3(signature = (rate = 0.03, sigma = 0.05, maturity = 1.0, strike = 60.0, s_max = 120.0, n = 6, n_xi = 10, eps_schr = 1e-4))]
#[allow(clippy::too_many_arguments)]
fn price_bs1d<'py>(
    py: Python<'py>,
    rate: f64,
    sigma: f64,
    maturity: f64,
    strike: f64,
    s_max: f64,
    n: u32,
    n_xi: u32,
    eps_schr: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut setup = Bs1dSetup { rate, sigma, maturity, strike, s_max, n, ..Bs1dSetup::reference() };
    setup.schrodinger.n_xi = n_xi;
    setup.schrodinger.eps_schr = eps_schr;
    let r = py.detach(|| run_bs1d(&setup)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("s", &r.s)?;
    out.set_item("quantum", &r.v_quantum)?;
    out.set_item("fd", &r.v_fd)?;
    out.set_item("expm", &r.v_expm)?;
    out.set_item("analytic", &r.v_analytic)?;
    out.set_item("fd_steps", r.fd_steps)?;
    out.set_item("segments", r.solution.segments)?;
    out.set_item("qubits", r.solution.qubits())?;
    Ok(out.into_any())
}

/// Heston call prices at the reference marked point `(S0, v0)` for each strike.
#[pyfunction]
#[pyo3(signature = (strikes, n_s = 4, n_v = 3))]
fn heston_scan<'py>(py: Python<'py>, strikes: Vec<f64>, n_s: u32, n_v: u32) -> PyResult<Bound<'py, PyAny>> {
    let setup = HestonSetup { n_s, n_v, ..HestonSetup::reference() };
    let rows = py.detach(|| run_heston_scan(&setup, &strikes)).map_err(to_py_err)?;
    to_py(py, &rows)
}

/// Unit-constant resource estimate for one `(model, d, n)` point.
///
/// `model` is one of `bs1d`, `bs_multi`, `heston1d`, `heston_multi`.
#[pyfunction]
#[pyo3(signature = (model, d, n, n_xi = 4, t = 1.0, q_sigma = 1))]
fn resources<'py>(
    py: Python<'py>,
    model: &str,
    d: u32,
    n: u32,
    n_xi: u32,
    t: f64,
    q_sigma: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let model: CostModel = serde_json::from_value(serde_json::Value::String(model.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown cost model `{model}`")))?;
    let mut q = ResourceQuery::new(model, d, n, n_xi, t);
    q.q_sigma = q_sigma;
    let r = quantum_cost(&q).map_err(to_py_err)?;
    to_py(py, &r)
}

/// SSVI calibration of one implied-volatility slice.
#[pyfunction]
#[pyo3(signature = (s0, rate, maturity, strikes, vols, vega_weights = false))]
fn fit_smile<'py>(
    py: Python<'py>,
    s0: f64,
    rate: f64,
    maturity: f64,
    strikes: Vec<f64>,
    vols: Vec<f64>,
    vega_weights: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let slice = SmileSlice::new(s0, rate, maturity, strikes, vols).map_err(to_py_err)?;
    let weights = if vega_weights { QuoteWeights::Vega } else { QuoteWeights::Uniform };
    let fit = py.detach(|| fit_ssvi(&slice, weights, DEFAULT_EPS_CONS)).map_err(to_py_err)?;
    to_py(py, &fit)
}

#[pymodule]
fn qpde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bs_price, m)?)?;
    m.add_function(wrap_pyfunction!(price_bs1d, m)?)?;
    m.add_function(wrap_pyfunction!(heston_scan, m)?)?;
    m.add_function(wrap_pyfunction!(resources, m)?)?;
    m.add_function(wrap_pyfunction!(fit_smile, m)?)?;
    Ok(())
}
