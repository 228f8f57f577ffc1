//! Python bindings. Scenarios go in and reports come out as JSON strings so the
//! Python side sees exactly what the CLI writes to `report.json`.

use std::path::Path;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;
use virial_core::models::{self, Params};
use virial_core::scenario::{self, Overrides, PeriodSetting, ScenarioConfig};
use virial_core::Error;

fn to_py(e: Error) -> PyErr {
    match scenario::exit_code(&e) {
        3 => PyOSError::new_err(e.to_string()),
        2 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Names, descriptions, formalisms, parameters and known constants of the built-in models.
#[pyfunction]
fn list_models() -> PyResult<String> {
    let rows: Vec<_> = models::registry()
        .iter()
        .map(|d| {
            json!({
                "name": d.name,
                "description": d.description,
                "formalisms": d.formalisms,
                "parameters": d.parameters,
                "constants": d.constants,
            })
        })
        .collect();
    scenario::to_json_string(&rows).map_err(to_py)
}

/// Model checks as JSON (`{"model", "entries": [...]}`).
#[pyfunction]
fn check_model(name: &str) -> PyResult<String> {
    let d = models::build_unchecked(name, &Params::new()).map_err(to_py)?;
    let rep = d.check().map_err(to_py)?;
    scenario::to_json_string(&rep).map_err(to_py)
}

/// Validate a scenario given as JSON text; returns the list of virial function names.
#[pyfunction]
fn validate(scenario_json: &str) -> PyResult<Vec<String>> {
    let config = ScenarioConfig::from_json(scenario_json).map_err(to_py)?;
    let prepared = scenario::prepare(&config).map_err(to_py)?;
    Ok(prepared.virials)
}

/// Integrate a scenario given as JSON text and return the report as JSON.
/// With `out_dir` the three output files are written as well.
#[pyfunction]
#[pyo3(signature = (scenario_json, out_dir=None, t_max=None, period=None))]
fn run_scenario(
    py: Python<'_>,
    scenario_json: &str,
    out_dir: Option<String>,
    t_max: Option<f64>,
    period: Option<String>,
) -> PyResult<String> {
    let config = ScenarioConfig::from_json(scenario_json).map_err(to_py)?;
    let overrides = Overrides {
        t_max,
        period: period
            .as_deref()
            .map(str::parse::<PeriodSetting>)
            .transpose()
            .map_err(to_py)?,
    };
    py.detach(|| {
        let run = scenario::run(&config, &overrides)?;
        if let Some(dir) = &out_dir {
            scenario::write_outputs(&run, Path::new(dir))?;
        }
        scenario::to_json_string(&run.report)
    })
    .map_err(to_py)
}

#[pymodule]
fn virial(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(list_models, m)?)?;
    m.add_function(wrap_pyfunction!(check_model, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
