//! Python bindings. Structured results come back as plain dicts and lists.

use instanton_lab::calculus::fit_samples;
use instanton_lab::euclidean::Point4;
use instanton_lab::error::LabError;
use instanton_lab::gluing::{psi_c_partial as psi_c_partial_rs, tune_parameters, SweepGrid};
use instanton_lab::report::{emit_plots as emit_plots_rs, ReportDocument};
use instanton_lab::so3::{normalize, Gram};
use instanton_lab::suites::{run_suite as run_suite_rs, Config, Suite};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use std::path::PathBuf;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::Config { .. } | LabError::InvalidParameter(_) | LabError::DomainViolation { .. } | LabError::PoleAtOrigin => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config_from(config: Option<&str>) -> PyResult<Config> {
    let cfg = match config {
        None => Config::default(),
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("config line {}: {e}", e.line())))?,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn suite_named(name: &str) -> PyResult<Suite> {
    [Suite::TaubNut, Suite::Asymptotics, Suite::So3, Suite::Beth, Suite::Glue, Suite::FitDecay]
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown suite `{name}`")))
}

/// Taub-NUT in Gibbons-Hawking form with mass m.
#[pyclass(frozen)]
struct TaubNut(instanton_lab::taub_nut::TaubNut);

#[pymethods]
impl TaubNut {
    #[new]
    fn new(m: f64) -> PyResult<TaubNut> {
        instanton_lab::taub_nut::TaubNut::new(m).map(TaubNut).map_err(err)
    }

    #[getter]
    fn m(&self) -> f64 {
        self.0.m()
    }

    /// LeBrun coordinates (u, v, y1, y2, y3, R, V) at p.
    fn coords<'py>(&self, py: Python<'py>, p: [f64; 4]) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.coords(&Point4 { x: p }).map_err(err)?)
    }

    fn potential(&self, p: [f64; 4]) -> PyResult<f64> {
        self.0.potential(&Point4 { x: p }).map_err(err)
    }

    /// Metric matrix in the Euclidean frame, as four rows.
    fn metric(&self, p: [f64; 4]) -> PyResult<[[f64; 4]; 4]> {
        let g = self.0.metric(&Point4 { x: p }).map_err(err)?;
        Ok(std::array::from_fn(|i| std::array::from_fn(|j| g[(i, j)])))
    }

    fn __repr__(&self) -> String {
        format!("TaubNut(m={})", self.0.m())
    }
}

/// Dihedral normalization of a Gram matrix given as 9 row-major entries.
#[pyfunction]
fn normalize_gram<'py>(py: Python<'py>, gram: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let z = Gram::from_row_major(&gram).map_err(err)?;
    to_py(py, &normalize(&z))
}

/// Closed-form partial ∂^(p,q,s) ψ_c at fibration coordinates y.
#[pyfunction]
fn psi_c_partial(y: [f64; 3], m: f64, index: [u8; 3]) -> PyResult<Complex64> {
    psi_c_partial_rs(y, m, index).map_err(err)
}

/// Least-squares power law through (radius, value) samples: (exponent, intercept, residual).
#[pyfunction]
fn fit_decay(samples: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = fit_samples(samples).map_err(err)?;
    Ok((f.exponent, f.intercept, f.residual))
}

/// Default configuration as a JSON string.
#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&Config::default()).expect("config serializes")
}

#[pyfunction]
#[pyo3(signature = (config=None))]
fn config_hash(config: Option<&str>) -> PyResult<String> {
    Ok(config_from(config)?.hash())
}

/// Run a suite by its subcommand name; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (name, config=None))]
fn run_suite(py: Python<'_>, name: &str, config: Option<&str>) -> PyResult<String> {
    let suite = suite_named(name)?;
    let cfg = config_from(config)?;
    let rep = py.detach(|| run_suite_rs(suite, &cfg)).map_err(err)?;
    Ok(rep.to_json())
}

/// Search for a positivity certificate; returns it as a dict.
#[pyfunction]
#[pyo3(signature = (gram, m, k=3, config=None))]
fn find_certificate<'py>(py: Python<'py>, gram: Vec<f64>, m: f64, k: u32, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config)?;
    let z = normalize(&Gram::from_row_major(&gram).map_err(err)?).normalized;
    let weight = instanton_lab::ale::GroupWeight::dihedral(k).map_err(err)?;
    let model = instanton_lab::ale::AleModel::new(z, weight);
    let grid = SweepGrid::default();
    let cert = py.detach(|| tune_parameters(&model, m, &cfg.glue.search, &grid)).map_err(err)?;
    to_py(py, &cert)
}

/// Write the curves of a JSON report as CSV files plus manifest.json.
#[pyfunction]
fn emit_plots<'py>(py: Python<'py>, report: &str, out_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let rep = ReportDocument::from_json(report).map_err(err)?;
    to_py(py, &emit_plots_rs(&rep, &out_dir).map_err(err)?)
}

#[pymodule]
fn instanton_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TaubNut>()?;
    m.add_function(wrap_pyfunction!(normalize_gram, m)?)?;
    m.add_function(wrap_pyfunction!(psi_c_partial, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(find_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(emit_plots, m)?)?;
    Ok(())
}
