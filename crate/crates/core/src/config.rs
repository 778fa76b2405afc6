//! Run configuration: a TOML file with sections, overridable by dotted
//! `key=value` assignments.
//!
//! ```toml
//! kind = "solve"
//! seed = 0
//!
//! [problem]
//! p = 2.0
//! eps = 0.01
//! sigma = 0.05
//!
//! [grid]
//! extent = 1.0
//! nodes = 201
//! ```
//!
//! Only `problem.p`, `problem.eps`, `problem.sigma` and `grid.extent` are
//! mandatory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::FlowParams;
use crate::grid::Grid;
use crate::io;
use crate::model::{default_eps_reg, PhaseProfile, ProblemSpec};
use crate::stationary::SolverParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(String),
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
    #[error("override key {key:?}: {message}")]
    OverrideKey { key: String, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("{key}: referenced file {path} does not exist")]
    MissingFile { key: String, path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Solve,
    Evolve,
    Sweep,
    Critical,
    Verify,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Evolve => "evolve",
            Kind::Sweep => "sweep",
            Kind::Critical => "critical",
            Kind::Verify => "verify",
        }
    }
}

/// A scalar or one value per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    One(T),
    Each(Vec<T>),
}

impl<T: Copy> PerAxis<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            PerAxis::One(v) => vec![*v],
            PerAxis::Each(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dimension: usize,
    pub extent: PerAxis<f64>,
    #[serde(default = "default_nodes")]
    pub nodes: PerAxis<usize>,
}

fn one() -> usize {
    1
}

fn default_nodes() -> PerAxis<usize> {
    PerAxis::One(201)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub eps: f64,
    /// Constant boundary datum.
    pub sigma: f64,
    /// Constant weight; ignored when `q_file` is given.
    #[serde(default = "unit")]
    pub q: f64,
    /// Field CSV with one weight per node.
    #[serde(default)]
    pub q_file: Option<PathBuf>,
    /// Defaults to 1e-10 for p < 2 and 0 otherwise.
    #[serde(default)]
    pub eps_reg: Option<f64>,
    #[serde(default)]
    pub profile: PhaseProfile,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Trivial solution plus `offset` inside.
    #[default]
    AboveTrivial,
    /// Best minimizer minus `offset` inside.
    BelowMinimizer,
    /// Saddle pushed off along the mountain-pass path.
    Saddle,
    /// Field read from `initial_file`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub initial: InitialState,
    pub offset: f64,
    pub initial_file: Option<PathBuf>,
    /// Sup-norm distance for matching the limit to a steady state.
    pub classify_tol: f64,
    /// Perturbation size for the saddle start.
    pub delta: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            initial: InitialState::default(),
            offset: 0.5,
            initial_file: None,
            classify_tol: 1e-3,
            delta: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Explicit σ values; otherwise `count` evenly spaced in `[sigma_min, sigma_max]`.
    pub sigmas: Option<Vec<f64>>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub count: usize,
    /// Bracket width for `critical`.
    pub tol_sigma: f64,
    /// Extra phase widths for the critical-threshold table.
    pub eps_values: Vec<f64>,
    /// Collar width for the energy-gap check.
    pub collar: f64,
    pub ridge_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sigmas: None,
            sigma_min: 0.01,
            sigma_max: 1.0,
            count: 12,
            tol_sigma: 1e-3,
            eps_values: Vec::new(),
            collar: 0.1,
            ridge_samples: 256,
        }
    }
}

impl SweepConfig {
    pub fn sigma_values(&self) -> Vec<f64> {
        match &self.sigmas {
            Some(v) => v.clone(),
            None if self.count <= 1 => vec![self.sigma_min],
            None => (0..self.count)
                .map(|k| self.sigma_min + (self.sigma_max - self.sigma_min) * k as f64 / (self.count - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Random vector pairs per exponent and dimension.
    pub samples: usize,
    pub exponents: Vec<f64>,
    pub max_dimension: usize,
    pub comparison_trials: usize,
    pub comparison_horizon: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 100_000,
            exponents: vec![1.5, 2.0, 3.0],
            max_dimension: 4,
            comparison_trials: 20,
            comparison_horizon: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Sets a dotted key in a TOML table, creating intermediate tables.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let key = key.trim();
    let raw = raw.trim();
    // parse as a TOML value; bare words fall back to strings
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        let entry = t
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| ConfigError::OverrideKey {
            key: key.to_string(),
            message: format!("{part} is not a section"),
        })?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses config text with overrides; `base` resolves relative file paths.
pub fn parse_config_str(text: &str, overrides: &[String], base: &Path) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Toml(e.to_string()))?;
    for path in [&mut cfg.problem.q_file, &mut cfg.evolve.initial_file].into_iter().flatten() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, overrides, base)
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.problem.p;
        if !(p.is_finite() && p > 1.0) {
            return Err(invalid("problem.p", format!("requires 1 < p < inf, got {p}")));
        }
        for (key, v) in [
            ("problem.eps", self.problem.eps),
            ("problem.sigma", self.problem.sigma),
            ("problem.q", self.problem.q),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if let Some(r) = self.problem.eps_reg {
            if !(r.is_finite() && r >= 0.0) {
                return Err(invalid("problem.eps_reg", format!("must be non-negative, got {r}")));
            }
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0) {
            return Err(invalid("solver.tol", "must be positive"));
        }
        if self.solver.path_size < 3 {
            return Err(invalid("solver.path_size", "needs at least 3 states"));
        }
        self.flow.validate().map_err(|e| invalid("flow", e.to_string()))?;
        if self.evolve.initial == InitialState::File && self.evolve.initial_file.is_none() {
            return Err(invalid("evolve.initial_file", "required when evolve.initial = \"file\""));
        }
        for (key, path) in [
            ("problem.q_file", &self.problem.q_file),
            ("evolve.initial_file", &self.evolve.initial_file),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(ConfigError::MissingFile {
                        key: key.to_string(),
                        path: path.clone(),
                    });
                }
            }
        }
        let s = &self.sweep;
        if !(s.sigma_min > 0.0 && s.sigma_min < s.sigma_max) {
            return Err(invalid("sweep.sigma_min", "need 0 < sigma_min < sigma_max"));
        }
        if !(s.tol_sigma > 0.0) {
            return Err(invalid("sweep.tol_sigma", "must be positive"));
        }
        if s.eps_values.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(invalid("sweep.eps_values", "must be positive"));
        }
        if self.verify.max_dimension == 0 {
            return Err(invalid("verify.max_dimension", "must be at least 1"));
        }
        if self.verify.exponents.iter().any(|q| !(q.is_finite() && *q > 1.0)) {
            return Err(invalid("verify.exponents", "each must exceed 1"));
        }
        self.build_grid()?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, ConfigError> {
        let g = &self.grid;
        Grid::with_axes(g.dimension, &g.extent.values(), &g.nodes.values())
            .map(Arc::new)
            .map_err(|e| invalid("grid", e.to_string()))
    }

    /// The problem this config describes, with its own grid.
    pub fn build_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let grid = self.build_grid()?;
        let pc = &self.problem;
        let q = match &pc.q_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                let f = io::read_field_csv(&text).map_err(|e| invalid("problem.q_file", e.to_string()))?;
                if **f.grid() != *grid {
                    return Err(invalid("problem.q_file", "grid differs from [grid]"));
                }
                f.into_values()
            }
            None => vec![pc.q; grid.node_count()],
        };
        ProblemSpec::from_parts(
            grid.clone(),
            pc.p,
            pc.eps,
            q,
            vec![pc.sigma; grid.boundary().len()],
            pc.profile,
            pc.eps_reg.unwrap_or_else(|| default_eps_reg(pc.p)),
        )
        .map_err(|e| invalid("problem", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "solve"
[problem]
p = 2.0
eps = 0.01
sigma = 0.05
[grid]
extent = 1.0
nodes = 201
"#;

    fn parse(text: &str, o: &[&str]) -> Result<RunConfig, ConfigError> {
        let o: Vec<String> = o.iter().map(|s| s.to_string()).collect();
        parse_config_str(text, &o, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL, &[]).unwrap();
        assert_eq!(c.kind, Some(Kind::Solve));
        assert_eq!(c.solver, SolverParams::default());
        assert_eq!(c.evolve, EvolveConfig::default());
        assert_eq!(c.seed, 0);
        let spec = c.build_spec().unwrap();
        assert_eq!(spec.grid().node_count(), 201);
        assert_eq!(spec.eps_reg(), 0.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("eps = 0.01", "epsilonn = 0.01");
        let e = parse(&text, &[]).unwrap_err().to_string();
        assert!(e.contains("epsilonn"), "{e}");
    }

    #[test]
    fn missing_mandatory_key() {
        let text = MINIMAL.replace("sigma = 0.05", "");
        let e = parse(&text, &[]).unwrap_err().to_string();
        assert!(e.contains("sigma"), "{e}");
    }

    #[test]
    fn exponent_one_rejected() {
        let e = parse(MINIMAL, &["problem.p=1.0"]).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "problem.p"));
    }

    #[test]
    fn overrides_apply_with_types() {
        let c = parse(MINIMAL, &["problem.sigma=0.2", "flow.scheme=semi-implicit", "seed=7", "grid.nodes=[11, 9]"]).unwrap();
        assert_eq!(c.problem.sigma, 0.2);
        assert_eq!(c.flow.scheme, crate::evolution::Scheme::SemiImplicit);
        assert_eq!(c.seed, 7);
        assert!(parse(MINIMAL, &["problem.sigma=abc"]).is_err());
        assert!(parse(MINIMAL, &["nonsense"]).is_err());
    }

    #[test]
    fn missing_referenced_file() {
        let e = parse(MINIMAL, &["problem.q_file=\"/definitely/not/here.csv\""]).unwrap_err();
        assert!(matches!(e, ConfigError::MissingFile { .. }));
    }
}
