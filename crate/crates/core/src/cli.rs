//! The `pblap` command: parses a config, runs one experiment, writes its
//! artifacts and a manifest with content hashes.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bifurcation::{self, SweepMeta};
use crate::config::{self, ConfigError, InitialState, Kind, RunConfig};
use crate::evolution::{self, EvolutionError, FlowParams, LimitVerdict};
use crate::grid::Field;
use crate::io::{self, WithMeta};
use crate::model::{self, ProblemSpec};
use crate::stationary::{self, Classification, SolveReport, ThreeSolutions};
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "pblap", about = "One-phase p-Laplacian bifurcation laboratory")]
pub struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    pub kind: Kind,
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set problem.sigma=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "pblap-out")]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Flow(String),
    #[error("{0}")]
    Sweep(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 1,
            RunError::Solver(_) => 2,
            RunError::Flow(_) => 3,
            RunError::Sweep(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Output { .. } => "output",
            RunError::Solver(_) => "solver",
            RunError::Flow(_) => "flow",
            RunError::Sweep(_) => "sweep",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.category(), "code": self.exit_code(), "message": self.to_string() } })
    }
}

fn solver_err(e: impl ToString) -> RunError {
    RunError::Solver(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: Kind,
    pub run_id: String,
    pub seed: u64,
    pub version: String,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
    /// The only time-dependent entry.
    pub created: String,
}

pub const MANIFEST: &str = "manifest.json";

/// Writes files into the output directory and records their hashes.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|source| RunError::Output { path, source })?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
            bytes: content.len(),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        self.write(name, &io::to_json(value))
    }

    pub fn report(&mut self, stem: &str, report: &SolveReport) -> Result<(), RunError> {
        self.json(&format!("{stem}.json"), &report.summary())?;
        self.write(&format!("{stem}.csv"), &io::field_to_csv(&report.field))
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }
}

/// Deterministic run identifier: a prefix of the hash of kind and config.
pub fn run_id(kind: Kind, cfg: &RunConfig) -> String {
    let text = serde_json::to_string(&(kind, cfg)).expect("serializable");
    hex::encode(Sha256::digest(text.as_bytes()))[..12].to_string()
}

fn solutions(spec: &ProblemSpec, cfg: &RunConfig) -> Result<ThreeSolutions, RunError> {
    stationary::three_solutions(spec, &cfg.solver).map_err(solver_err)
}

fn run_solve(spec: &ProblemSpec, cfg: &RunConfig, out: &mut Emitter) -> Result<(), RunError> {
    let sol = solutions(spec, cfg)?;
    out.report("u0", &sol.u0)?;
    out.report("u2", &sol.u2)?;
    let minimizers: Vec<_> = sol.minimizers.iter().map(|m| m.summary()).collect();
    let (gap, _, _) = bifurcation::energy_gap_check(spec, cfg.sweep.collar).map_err(solver_err)?;
    out.json("energy_gap.json", &gap)?;
    let v2 = sol.u2.field.axpy(-1.0, &sol.u0.field);
    let norm = model::gradient_seminorm(&v2, spec.p());
    if norm > 0.0 {
        let ridge = bifurcation::mountain_ridge_probe(
            spec,
            &sol.u0.field,
            Some(&v2),
            0.25 * norm,
            cfg.sweep.ridge_samples.max(1),
            cfg.seed,
        )
        .map_err(solver_err)?;
        out.json("ridge.json", &ridge)?;
    }
    let mut saddle_error = None;
    match &sol.saddle {
        Some(Ok((u1, path))) => {
            out.report("u1", u1)?;
            out.json(
                "path.json",
                &json!({
                    "energies": path.energies,
                    "max_index": path.max_index,
                    "max_history": path.max_history,
                    "refinements": path.refinements,
                }),
            )?;
        }
        Some(Err(e)) => saddle_error = Some(e.clone()),
        None => {}
    }
    out.json(
        "solutions.json",
        &json!({
            "premise": sol.premise,
            "minimizers": minimizers,
            "unconverged_seeds": sol.unconverged,
            "saddle_error": saddle_error,
        }),
    )?;
    for (name, r) in [("u0", &sol.u0), ("u2", &sol.u2)] {
        if !r.converged {
            return Err(RunError::Solver(format!(
                "{name} did not converge: residual {:.3e} > tol {:.1e}",
                r.residual, r.tol
            )));
        }
    }
    if !sol.unconverged.is_empty() {
        // a seed that stalls may hide a lower minimizer
        return Err(RunError::Solver(format!(
            "minimizer seeds {:?} did not converge",
            sol.unconverged
        )));
    }
    match saddle_error {
        Some(e) => Err(RunError::Solver(format!("mountain pass failed: {e}"))),
        None => Ok(()),
    }
}

fn candidates(sol: &ThreeSolutions) -> Vec<SolveReport> {
    let mut c = vec![sol.u0.clone()];
    c.extend(
        sol.minimizers
            .iter()
            .filter(|m| m.classification == Classification::Minimizer)
            .cloned(),
    );
    if let Some(Ok((u1, _))) = &sol.saddle {
        c.push(u1.clone());
    }
    c
}

fn initial_state(spec: &ProblemSpec, cfg: &RunConfig, sol: &ThreeSolutions) -> Result<Field, RunError> {
    let shifted = |f: &Field, by: f64| -> Result<Field, RunError> {
        let mut v: Vec<f64> = f.values().iter().map(|x| x + by).collect();
        spec.impose_boundary(&mut v);
        f.with_values(v).map_err(solver_err)
    };
    let e = &cfg.evolve;
    match e.initial {
        InitialState::AboveTrivial => shifted(&sol.u0.field, e.offset),
        InitialState::BelowMinimizer => shifted(&sol.u2.field, -e.offset),
        InitialState::Saddle => match &sol.saddle {
            Some(Ok((u1, path))) => {
                evolution::destabilize_saddle_seeded(u1, spec, e.delta, path, cfg.seed).map_err(solver_err)
            }
            Some(Err(err)) => Err(RunError::Solver(format!("mountain pass failed: {err}"))),
            None => Err(RunError::Solver("no saddle: premise fails at this datum".into())),
        },
        InitialState::File => {
            let path = e.initial_file.as_ref().expect("validated");
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            let f = io::read_field_csv(&text).map_err(|err| ConfigError::Invalid {
                key: "evolve.initial_file".into(),
                message: err.to_string(),
            })?;
            if **f.grid() != **spec.grid() {
                return Err(ConfigError::Invalid {
                    key: "evolve.initial_file".into(),
                    message: "grid differs from [grid]".into(),
                }
                .into());
            }
            Ok(Field::new(spec.grid().clone(), f.into_values()).map_err(solver_err)?)
        }
    }
}

fn run_evolve(spec: &ProblemSpec, cfg: &RunConfig, id: &str, out: &mut Emitter) -> Result<(), RunError> {
    let sol = solutions(spec, cfg)?;
    let v0 = initial_state(spec, cfg, &sol)?;
    let trace = match evolution::evolve(&v0, spec, &cfg.flow) {
        Ok(t) => t,
        Err(EvolutionError::Step { last, time, halvings, .. }) => {
            out.write(&format!("trace_{id}_failed.csv"), &io::field_to_csv(&last))?;
            return Err(RunError::Flow(format!(
                "inner solve failed at t = {time} after {halvings} halvings; reduce flow.dt"
            )));
        }
        Err(e) => return Err(RunError::Flow(e.to_string())),
    };
    let (manifest, files) = io::export_trace(&trace, id);
    for (name, text) in &files {
        out.write(name, text)?;
    }
    out.json(&format!("trace_{id}.json"), &manifest)?;
    let cands = candidates(&sol);
    let labels: Vec<&str> = cands.iter().map(|c| c.classification.as_str()).collect();
    let limit = evolution::classify_state(trace.last(), &cands, cfg.evolve.classify_tol)
        .map_err(|e| RunError::Flow(e.to_string()))?;
    let dissipation = evolution::dissipation_report(&trace).map_err(|e| RunError::Flow(e.to_string()))?;
    let matched = match limit {
        LimitVerdict::Matched { index, .. } => Some(labels[index]),
        LimitVerdict::NotMatched { .. } => None,
    };
    out.json(
        "evolve.json",
        &json!({
            "verdict": trace.verdict,
            "limit": limit,
            "matched": matched,
            "candidate_energies": cands.iter().map(|c| c.energy.total).collect::<Vec<_>>(),
            "candidate_classes": labels,
            "dissipation": dissipation,
            "warnings": trace.warnings,
        }),
    )
}

fn run_sweep(spec: &ProblemSpec, cfg: &RunConfig, out: &mut Emitter) -> Result<(), RunError> {
    let sigmas = cfg.sweep.sigma_values();
    let result = bifurcation::sigma_sweep(spec, &sigmas, &cfg.solver, cfg.seed).map_err(|e| RunError::Sweep(e.to_string()))?;
    out.write("sweep.csv", &io::sweep_to_csv(&result))?;
    out.json("sweep.json", &result)?;
    result.check_monotone().map_err(|e| RunError::Sweep(e.to_string()))
}

fn run_critical(spec: &ProblemSpec, cfg: &RunConfig, out: &mut Emitter) -> Result<(), RunError> {
    let s = &cfg.sweep;
    let bracket = |spec: &ProblemSpec| {
        bifurcation::find_critical_sigma(spec, s.sigma_min, s.sigma_max, s.tol_sigma, &cfg.solver)
            .map_err(|e| RunError::Sweep(e.to_string()))
    };
    let main = bracket(spec)?;
    out.json(
        "critical.json",
        &WithMeta {
            meta: SweepMeta::new(spec, cfg.seed),
            data: main,
        },
    )?;
    if !s.eps_values.is_empty() {
        let meta = SweepMeta::new(spec, cfg.seed);
        let mut text = format!("{}\neps,sigma_lo,sigma_hi,width\n", meta.header());
        for &eps in &s.eps_values {
            let b = bracket(&spec.with_eps(eps).map_err(|e| RunError::Sweep(e.to_string()))?)?;
            text.push_str(&format!("{},{},{},{}\n", eps, b.sigma_lo, b.sigma_hi, b.width));
        }
        out.write("eps_table.csv", &text)?;
    }
    Ok(())
}

fn run_verify(spec: &ProblemSpec, cfg: &RunConfig, out: &mut Emitter) -> Result<(), RunError> {
    let v = &cfg.verify;
    let mut suites = Vec::new();
    for &p in &v.exponents {
        for dim in 1..=v.max_dimension {
            suites.push(verify::inequality_suite(p, dim, v.samples, cfg.seed));
        }
    }
    let quadrature = verify::quadrature_check(1000, cfg.seed);
    let mut comparisons = Vec::new();
    for &p in &v.exponents {
        let mut s = ProblemSpec::from_parts(
            spec.grid().clone(),
            p,
            spec.eps(),
            spec.q().to_vec(),
            spec.sigma().to_vec(),
            spec.profile(),
            model::default_eps_reg(p),
        )
        .map_err(solver_err)?;
        if cfg.problem.eps_reg.is_some() {
            s = s.with_eps_reg(spec.eps_reg()).map_err(solver_err)?;
        }
        let params = FlowParams {
            dt: cfg.flow.dt.min(0.9 * FlowParams::monotone_dt(&s)),
            horizon: v.comparison_horizon,
            ..cfg.flow
        };
        let t = verify::comparison_trials(&s, &params, v.comparison_trials, cfg.seed)
            .map_err(|e| RunError::Flow(e.to_string()))?;
        comparisons.push(json!({
            "p": p,
            "dt": t.dt,
            "trials": t.trials,
            "max_violation": t.max_violation,
            "failures": t.failures,
            "passed": t.failures == 0,
        }));
    }
    let passed = suites.iter().all(|s| s.passed)
        && quadrature <= 1e-10
        && comparisons.iter().all(|c| c["passed"] == json!(true));
    out.json(
        "verify.json",
        &json!({
            "passed": passed,
            "inequalities": suites,
            "quadrature_p2_deviation": quadrature,
            "comparison": comparisons,
        }),
    )?;
    if !passed {
        eprintln!("pblap: verification failed, see verify.json");
    }
    Ok(())
}

/// Runs one experiment. Artifacts written before a failure stay listed in
/// the manifest.
pub fn run(kind: Kind, cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, (RunError, Option<Manifest>)> {
    if let Some(k) = cfg.kind {
        if k != kind {
            let e = ConfigError::Invalid {
                key: "kind".into(),
                message: format!("config says {} but {} was requested", k.as_str(), kind.as_str()),
            };
            return Err((e.into(), None));
        }
    }
    let spec = cfg.build_spec().map_err(|e| (e.into(), None))?;
    let mut out = Emitter::new(out_dir).map_err(|e| (e, None))?;
    let id = run_id(kind, cfg);
    let result = match kind {
        Kind::Solve => run_solve(&spec, cfg, &mut out),
        Kind::Evolve => run_evolve(&spec, cfg, &id, &mut out),
        Kind::Sweep => run_sweep(&spec, cfg, &mut out),
        Kind::Critical => run_critical(&spec, cfg, &mut out),
        Kind::Verify => run_verify(&spec, cfg, &mut out),
    };
    if let Err(e) = &result {
        let _ = out.json("error.json", &e.to_json());
    }
    let manifest = Manifest {
        kind,
        run_id: id,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        files: out.files().to_vec(),
        created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let written = std::fs::write(out_dir.join(MANIFEST), io::to_json(&manifest)).map_err(|source| RunError::Output {
        path: out_dir.join(MANIFEST),
        source,
    });
    match (result, written) {
        (Err(e), _) => Err((e, Some(manifest))),
        (Ok(()), Err(e)) => Err((e, None)),
        (Ok(()), Ok(())) => Ok(manifest),
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("PBLAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| ConfigError::Invalid {
        key: "PBLAP_THREADS".into(),
        message: format!("expected a positive integer, got {raw:?}"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid {
            key: "PBLAP_THREADS".into(),
            message: e.to_string(),
        })
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    let outcome = configure_threads()
        .and_then(|()| config::parse_config(&args.config, &args.overrides))
        .map_err(|e| (RunError::from(e), None))
        .and_then(|cfg| run(args.kind, &cfg, &args.out));
    match outcome {
        Ok(m) => {
            println!("{}", args.out.join(MANIFEST).display());
            for f in &m.files {
                println!("  {}", f.name);
            }
            0
        }
        Err((e, _)) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
