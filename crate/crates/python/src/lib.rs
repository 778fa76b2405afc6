//! Python bindings: build a problem from a TOML config string, evaluate the
//! discrete energy and residual, and run the solver pipeline. Structured
//! results cross the boundary as JSON text.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pblap_core::config::{self, Kind, RunConfig};
use pblap_core::model::{self, inequality};
use pblap_core::stationary;
use pblap_core::{Field, ProblemSpec};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl ToString) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(module = "pblap")]
struct Problem {
    cfg: RunConfig,
    spec: ProblemSpec,
}

impl Problem {
    fn field(&self, values: Vec<f64>) -> PyResult<Field> {
        Field::new(self.spec.grid().clone(), values).map_err(value_err)
    }
}

#[pymethods]
impl Problem {
    /// Parses a TOML config; relative file paths resolve against `base`.
    #[new]
    #[pyo3(signature = (config, overrides = Vec::new(), base = None))]
    fn new(config: &str, overrides: Vec<String>, base: Option<PathBuf>) -> PyResult<Self> {
        let base = base.unwrap_or_else(|| PathBuf::from("."));
        let cfg = config::parse_config_str(config, &overrides, &base).map_err(value_err)?;
        let spec = cfg.build_spec().map_err(value_err)?;
        Ok(Problem { cfg, spec })
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.spec.grid().node_count()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.spec.p()
    }

    /// Node coordinates, one list per node.
    fn coordinates(&self) -> Vec<Vec<f64>> {
        let g = self.spec.grid();
        (0..g.node_count()).map(|i| g.coords(i)[..g.dimension()].to_vec()).collect()
    }

    /// The constant-interior field carrying the boundary datum.
    fn initial_field(&self, interior: f64) -> Vec<f64> {
        self.spec.field_with_interior(interior).into_values()
    }

    fn energy(&self, values: Vec<f64>) -> PyResult<f64> {
        let u = self.field(values)?;
        Ok(model::energy(&u, &self.spec).map_err(value_err)?.total)
    }

    fn residual(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let u = self.field(values)?;
        Ok(model::residual(&u, &self.spec).map_err(value_err)?.into_values())
    }

    /// Trivial, minimizing and mountain-pass solutions as JSON:
    /// `{"premise", "u0", "u2", "u1"}`, each report with its node values.
    fn three_solutions(&self, py: Python<'_>) -> PyResult<String> {
        let (spec, params) = (&self.spec, &self.cfg.solver);
        let sol = py
            .detach(|| stationary::three_solutions(spec, params))
            .map_err(runtime_err)?;
        let report = |r: &stationary::SolveReport| {
            serde_json::json!({ "summary": r.summary(), "values": r.field.values() })
        };
        let u1 = match &sol.saddle {
            Some(Ok((u1, _))) => report(u1),
            Some(Err(e)) => serde_json::json!({ "error": e }),
            None => serde_json::Value::Null,
        };
        let out = serde_json::json!({
            "premise": sol.premise,
            "u0": report(&sol.u0),
            "u2": report(&sol.u2),
            "u1": u1,
        });
        Ok(out.to_string())
    }
}

/// Runs one experiment as the command-line tool would; returns the manifest
/// JSON.
#[pyfunction]
#[pyo3(signature = (kind, config, out, overrides = Vec::new()))]
fn run(py: Python<'_>, kind: &str, config: PathBuf, out: PathBuf, overrides: Vec<String>) -> PyResult<String> {
    let kind = <Kind as clap::ValueEnum>::from_str(kind, true).map_err(value_err)?;
    let cfg = config::parse_config(&config, &overrides).map_err(value_err)?;
    let out: &Path = &out;
    let manifest = py
        .detach(|| pblap_core::cli::run(kind, &cfg, out))
        .map_err(|(e, _)| runtime_err(e.to_json()))?;
    serde_json::to_string(&manifest).map_err(runtime_err)
}

/// Minimum residual of the elementary p-Laplacian vector inequalities for
/// one pair; non-negative up to rounding.
#[pyfunction]
fn inequality_residual(a: Vec<f64>, b: Vec<f64>, p: f64) -> PyResult<f64> {
    let r = inequality::inequality_oracle(&a, &b, p).map_err(value_err)?;
    Ok(r.min_residual())
}

#[pymodule]
fn pblap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(inequality_residual, m)?)?;
    Ok(())
}
