//! Python bindings for the chiral absorption estimation toolkit.

use std::collections::BTreeMap;

use chiral_qfim::analytic::{
    analytic_bounds as closed_form, fidelity_fringe, InputStateKind, SensitivityReport,
};
use chiral_qfim::channel::{ChiralParams, ParamLabel};
use chiral_qfim::estimation::{qfim_pipeline, DerivativeMethod};
use chiral_qfim::experiments::{error_propagation_sensitivity, preset, run_sweep};
use chiral_qfim::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain { .. }
        | Error::InvalidState(_)
        | Error::UnknownLabel(_)
        | Error::Unsupported(_)
        | Error::Config(_)
        | Error::Cutoff { .. }
        | Error::Truncation { .. } => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn state(name: &str) -> PyResult<InputStateKind> {
    name.parse().map_err(to_py)
}

fn point(x_d: f64, x_s: f64, delta: f64, sigma: f64) -> PyResult<ChiralParams> {
    ChiralParams::from_composite(x_d, x_s, delta, sigma).map_err(to_py)
}

fn report_map(r: &SensitivityReport) -> BTreeMap<String, f64> {
    r.values
        .iter()
        .map(|(k, v)| (k.as_str().to_string(), *v))
        .collect()
}

/// Closed-form standard-deviation bounds keyed by parameter name.
#[pyfunction]
#[pyo3(signature = (state_name, x_d, x_s, delta=0.0, sigma=0.0))]
fn analytic_bounds(
    state_name: &str,
    x_d: f64,
    x_s: f64,
    delta: f64,
    sigma: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let r = closed_form(&state(state_name)?, &point(x_d, x_s, delta, sigma)?).map_err(to_py)?;
    Ok(report_map(&r))
}

/// Numerical QFIM of the output state.
///
/// Returns `(params, f, bounds)`; a bound is `None` for a parameter outside
/// the identifiable subspace.
#[pyfunction]
#[pyo3(signature = (state_name, x_d, x_s, delta=0.0, sigma=0.0, params=None))]
#[allow(clippy::type_complexity)]
fn numeric_qfim(
    state_name: &str,
    x_d: f64,
    x_s: f64,
    delta: f64,
    sigma: f64,
    params: Option<Vec<String>>,
) -> PyResult<(Vec<String>, Vec<Vec<f64>>, Vec<Option<f64>>)> {
    let kind = state(state_name)?;
    let labels: Vec<ParamLabel> = match params {
        Some(names) => names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<_, _>>()
            .map_err(to_py)?,
        None => kind.default_params(),
    };
    let input = kind.prepare_default().map_err(to_py)?;
    let run = qfim_pipeline(
        &input,
        &point(x_d, x_s, delta, sigma)?,
        &labels,
        DerivativeMethod::AnalyticKraus,
    )
    .map_err(to_py)?;
    let names = run
        .qfim
        .params
        .iter()
        .map(|p| p.as_str().to_string())
        .collect();
    Ok((names, run.qfim.f, run.qfim.bounds))
}

/// Intensity-measurement sensitivity for one parameter, or `None` where the
/// signal has zero slope.
#[pyfunction]
#[pyo3(signature = (state_name, param, x_d, x_s, delta=0.0, sigma=0.0))]
fn intensity_sensitivity(
    state_name: &str,
    param: &str,
    x_d: f64,
    x_s: f64,
    delta: f64,
    sigma: f64,
) -> PyResult<Option<f64>> {
    let target: ParamLabel = param.parse().map_err(to_py)?;
    error_propagation_sensitivity(&state(state_name)?, &point(x_d, x_s, delta, sigma)?, target)
        .map_err(to_py)
}

/// Overlap between the ideal and absorbed output states.
#[pyfunction]
#[pyo3(signature = (state_name, x_d, x_s, delta=0.0, sigma=0.0))]
fn fidelity(state_name: &str, x_d: f64, x_s: f64, delta: f64, sigma: f64) -> PyResult<f64> {
    fidelity_fringe(&state(state_name)?, &point(x_d, x_s, delta, sigma)?).map_err(to_py)
}

/// Runs a named preset sweep and returns the CSV text.
#[pyfunction]
fn sweep_preset(py: Python<'_>, name: &str) -> PyResult<String> {
    let spec = preset(name).map_err(to_py)?;
    py.detach(|| run_sweep(&spec).and_then(|t| t.to_csv_string()))
        .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "chiral_qfim")]
fn chiral_qfim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(analytic_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(numeric_qfim, m)?)?;
    m.add_function(wrap_pyfunction!(intensity_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_preset, m)?)?;
    Ok(())
}
