//! The parabolic flow `w_t - Δ_p w + Q β_ε(w) = 0` with `w = σ` on the
//! boundary, discretized in time by backward Euler on the discrete energy.
//!
//! An implicit step from `w` minimizes
//! `J(x) + (vol / 2dt) |x - w|²`, so the energy cannot increase and
//! `vol |x - w|² / dt` is the dissipation of the step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridError};
use crate::linalg::{norm2, sup_norm, BandMatrix, LinalgError};
use crate::model::{self, FreeSet, Functional, ModelError, ProblemSpec};
use crate::optimize::{self, DescentMethod};
use crate::stationary::{Classification, PathState, SolveReport};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linear(#[from] LinalgError),
    #[error("invalid flow parameter {name} = {value}")]
    Param { name: &'static str, value: f64 },
    #[error("inner solve failed at t = {time} after {halvings} halvings (residual {residual:e}); reduce dt")]
    Step {
        time: f64,
        halvings: usize,
        residual: f64,
        last: Box<Field>,
    },
    #[error("initial fields are not ordered (node {node}: {low} > {high})")]
    Unordered { node: usize, low: f64, high: f64 },
    #[error("trace has not converged")]
    NotConverged,
    #[error("{count} candidates lie within {tol} of the limit")]
    Ambiguous { count: usize, tol: f64 },
    #[error("report is classified {0:?}, not as a saddle")]
    NotSaddle(Classification),
    #[error("no energy-decreasing perturbation of the saddle at this resolution")]
    NoDescent,
    #[error("trace needs at least two snapshots")]
    ShortTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Implicit,
    /// Diffusion coefficient frozen at the old state, `β_ε` term lagged: one
    /// linear solve per step.
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Bound on `sup |Δw| / Δt` over a stride for convergence.
    pub state_tol: f64,
    pub residual_tol: f64,
    /// Steps between snapshots.
    pub stride: usize,
    pub max_halvings: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dt: 1e-3,
            horizon: 50.0,
            scheme: Scheme::Implicit,
            inner_tol: 1e-10,
            inner_max_iter: 100,
            state_tol: 1e-6,
            residual_tol: 1e-6,
            stride: 10,
            max_halvings: 8,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let positive = [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("inner_tol", self.inner_tol),
            ("state_tol", self.state_tol),
            ("residual_tol", self.residual_tol),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(EvolutionError::Param { name, value });
            }
        }
        if self.stride == 0 {
            return Err(EvolutionError::Param { name: "stride", value: 0.0 });
        }
        Ok(())
    }

    /// Largest step with `dt · K <= 1` for the reaction of `spec`.
    pub fn monotone_dt(spec: &ProblemSpec) -> f64 {
        1.0 / spec.reaction_lipschitz()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Strides in a row that must satisfy the convergence test.
pub const DETECTION_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub inner_iterations: usize,
    pub halvings: usize,
    /// Equation residual sup-norm of the new state.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FlowVerdict {
    Converged { time: f64 },
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// Time of every step, starting with 0.
    pub step_times: Vec<f64>,
    /// Regularized energy after every step, starting with the initial state.
    pub energies: Vec<f64>,
    /// `∫(w_t)²` over each step.
    pub dissipation: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
    pub verdict: FlowVerdict,
}

impl EvolutionTrace {
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trace has an initial snapshot")
    }

    pub fn converged(&self) -> bool {
        matches!(self.verdict, FlowVerdict::Converged { .. })
    }
}

/// A nodal reaction `α(x_i, w)` for the general problem
/// `w_t - Δ_p w + α(x, w) = 0`, with `0 <= α <= K w` and Lipschitz constant K.
pub trait Reaction: Sync {
    fn alpha(&self, node: usize, w: f64) -> f64;
    fn alpha_prime(&self, node: usize, w: f64) -> f64;
    fn lipschitz(&self) -> f64;
}

/// `α = Q β_ε(w)` evaluated at the node.
pub struct PhaseReaction<'a> {
    pub spec: &'a ProblemSpec,
}

impl Reaction for PhaseReaction<'_> {
    fn alpha(&self, node: usize, w: f64) -> f64 {
        self.spec.q()[node] * self.spec.beta_eps(w)
    }
    fn alpha_prime(&self, node: usize, w: f64) -> f64 {
        self.spec.q()[node] * self.spec.beta_eps_prime(w)
    }
    fn lipschitz(&self) -> f64 {
        self.spec.reaction_lipschitz()
    }
}

/// `α = k · max(w, 0)`.
pub struct LinearReaction {
    pub k: f64,
}

impl Reaction for LinearReaction {
    fn alpha(&self, _: usize, w: f64) -> f64 {
        self.k * w.max(0.0)
    }
    fn alpha_prime(&self, _: usize, w: f64) -> f64 {
        if w > 0.0 {
            self.k
        } else {
            0.0
        }
    }
    fn lipschitz(&self) -> f64 {
        self.k
    }
}

/// How a step is computed.
#[derive(Clone, Copy)]
enum Stepper<'r> {
    Energy(Scheme),
    Nodal(&'r dyn Reaction),
}

struct StepResult {
    values: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn implicit_step(spec: &ProblemSpec, w: &[f64], dt: f64, params: &FlowParams) -> Option<StepResult> {
    let vol = spec.grid().node_volume();
    let free = FreeSet::interior(spec);
    let center = free.gather(w);
    let f = Functional::new(spec, free, w.to_vec(), true).with_proximal(vol / dt, center.clone());
    let out = optimize::minimize(&f, center, params.inner_tol, params.inner_max_iter, DescentMethod::Newton);
    let stalled = matches!(out.error, Some(optimize::OptimizeError::LineSearch { .. }))
        && out.residual <= optimize::roundoff_floor(&f, &out.x);
    (out.converged || stalled).then(|| StepResult {
        values: f.expand(&out.x),
        iterations: out.iterations,
        residual: out.residual,
    })
}

fn semi_implicit_step(spec: &ProblemSpec, w: &[f64], dt: f64) -> Option<StepResult> {
    let grid = spec.grid();
    let vol = grid.node_volume();
    let cvol = grid.cell_volume();
    let p = spec.p();
    let reg = spec.eps_reg();
    let st = grid.gradient_stencil();
    let nc = grid.corners();
    let free = FreeSet::interior(spec);
    let (kl, _) = free.stiffness(spec).bandwidths();
    let mut a = BandMatrix::zeros(free.len(), kl, kl);
    // frozen coefficient per cell; the boundary part moves to the right side
    let mut rhs: Vec<f64> = free.gather(w).iter().map(|v| v * vol / dt).collect();
    let phase = model::discrete::phase_gradient(w, spec);
    for (r, n) in rhs.iter_mut().zip(free.nodes()) {
        *r -= phase[*n];
    }
    for (c, nodes) in grid.cells().iter().enumerate() {
        let g = grid.cell_gradient(w, c);
        let coef = model::discrete::flux_coeff(g[0] * g[0] + g[1] * g[1], p, reg);
        for k in 0..nc {
            let Some(ik) = free.index_of(nodes[k]) else { continue };
            for l in 0..nc {
                let v = cvol * coef * (st[k][0] * st[l][0] + st[k][1] * st[l][1]);
                match free.index_of(nodes[l]) {
                    Some(il) => a.add(ik, il, v),
                    None => rhs[ik] -= v * w[nodes[l]],
                }
            }
        }
    }
    a.add_diagonal(vol / dt);
    let x = a.cholesky_solve(&rhs).ok()?;
    let mut values = w.to_vec();
    free.scatter(&x, &mut values);
    let field = Field::new(grid.clone(), values.clone()).ok()?;
    let res = model::residual(&field, spec).ok()?;
    let step: f64 = x
        .iter()
        .zip(free.gather(w))
        .zip(free.gather(res.values()))
        .map(|((a, b), r)| ((a - b) / dt + r).abs())
        .fold(0.0, f64::max);
    Some(StepResult {
        values,
        iterations: 1,
        residual: step,
    })
}

/// Backward Euler for `w_t - Δ_p w + α(w) = 0` with a nodal reaction, by
/// Newton's method damped on the residual norm.
fn nodal_step(spec: &ProblemSpec, w: &[f64], dt: f64, params: &FlowParams, reaction: &dyn Reaction) -> Option<StepResult> {
    let vol = spec.grid().node_volume();
    let free = FreeSet::interior(spec);
    let nodes = free.nodes().to_vec();
    let old = free.gather(w);
    let f = Functional::new(spec, free, w.to_vec(), false);
    let eq = |x: &[f64]| -> Vec<f64> {
        let g = f.gradient(x);
        g.iter()
            .zip(x)
            .zip(&old)
            .zip(&nodes)
            .map(|(((g, xi), oi), &n)| g + vol * ((xi - oi) / dt + reaction.alpha(n, *xi)))
            .collect()
    };
    let mut x = old.clone();
    let mut r = eq(&x);
    for it in 0..params.inner_max_iter {
        let res = sup_norm(&r) / vol;
        if res <= params.inner_tol {
            return Some(StepResult {
                values: f.expand(&x),
                iterations: it,
                residual: res,
            });
        }
        let mut h = f.hessian(&x);
        for (i, (&xi, &n)) in x.iter().zip(&nodes).enumerate() {
            h.add(i, i, vol * (1.0 / dt + reaction.alpha_prime(n, xi)));
        }
        // one rounding of every unknown moves the residual by about this much
        let hmax = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = 8.0 * f64::EPSILON * (1.0 + sup_norm(&x)) * hmax / vol;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = h.lu_solve(&rhs).ok()?;
        let n0 = norm2(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let tr = eq(&trial);
            if norm2(&tr) < n0 {
                x = trial;
                r = tr;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return (res <= floor).then(|| StepResult {
                values: f.expand(&x),
                iterations: it,
                residual: res,
            });
        }
    }
    None
}

fn raw_step(spec: &ProblemSpec, w: &[f64], dt: f64, params: &FlowParams, stepper: Stepper) -> Option<StepResult> {
    match stepper {
        Stepper::Energy(Scheme::Implicit) => implicit_step(spec, w, dt, params),
        Stepper::Energy(Scheme::SemiImplicit) => semi_implicit_step(spec, w, dt),
        Stepper::Nodal(r) => nodal_step(spec, w, dt, params, r),
    }
}

/// Advances by `dt`, splitting the interval in halves (recursively, up to
/// `max_halvings` levels) when the inner solve fails.
fn advance(
    spec: &ProblemSpec,
    w: &[f64],
    dt: f64,
    params: &FlowParams,
    stepper: Stepper,
    depth: usize,
) -> Result<(StepResult, usize), (usize, Vec<f64>)> {
    if let Some(r) = raw_step(spec, w, dt, params, stepper) {
        return Ok((r, depth));
    }
    if depth >= params.max_halvings {
        return Err((depth, w.to_vec()));
    }
    let (first, d1) = advance(spec, w, 0.5 * dt, params, stepper, depth + 1)?;
    let (second, d2) = advance(spec, &first.values, 0.5 * dt, params, stepper, depth + 1)?;
    Ok((
        StepResult {
            values: second.values,
            iterations: first.iterations + second.iterations,
            residual: second.residual,
        },
        d1.max(d2),
    ))
}

/// One time step of length `params.dt` from `w` (boundary values pinned).
pub fn flow_step(w: &Field, spec: &ProblemSpec, params: &FlowParams) -> Result<Field, EvolutionError> {
    params.validate()?;
    spec.check_grid(w)?;
    let mut start = w.values().to_vec();
    spec.impose_boundary(&mut start);
    match advance(spec, &start, params.dt, params, Stepper::Energy(params.scheme), 0) {
        Ok((r, _)) => Ok(Field::new(spec.grid().clone(), r.values)?),
        Err((halvings, last)) => Err(EvolutionError::Step {
            time: params.dt,
            halvings,
            residual: f64::NAN,
            last: Box::new(Field::new(spec.grid().clone(), last)?),
        }),
    }
}

fn dissipation_of(old: &[f64], new: &[f64], vol: f64, dt: f64) -> f64 {
    vol * old.iter().zip(new).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() / dt
}

struct Runner<'a> {
    spec: &'a ProblemSpec,
    params: FlowParams,
    stepper: Stepper<'a>,
    w: Vec<f64>,
    time: f64,
    trace: EvolutionTrace,
    last_snapshot: Vec<f64>,
    streak: usize,
    steps_done: usize,
}

impl<'a> Runner<'a> {
    fn new(v0: &Field, spec: &'a ProblemSpec, params: &FlowParams, stepper: Stepper<'a>) -> Result<Self, EvolutionError> {
        params.validate()?;
        spec.check_grid(v0)?;
        let mut w = v0.values().to_vec();
        let mut warnings = Vec::new();
        if !spec.satisfies_boundary(v0) {
            spec.impose_boundary(&mut w);
            warnings.push("initial boundary values differ from the datum; overwritten".to_string());
        }
        let field = Field::new(spec.grid().clone(), w.clone())?;
        let e0 = model::energy(&field, spec)?.regularized_total;
        Ok(Runner {
            spec,
            params: *params,
            stepper,
            last_snapshot: w.clone(),
            w,
            time: 0.0,
            trace: EvolutionTrace {
                times: vec![0.0],
                snapshots: vec![field],
                step_times: vec![0.0],
                energies: vec![e0],
                dissipation: Vec::new(),
                diagnostics: Vec::new(),
                warnings,
                verdict: FlowVerdict::NotConverged,
            },
            streak: 0,
            steps_done: 0,
        })
    }

    /// One nominal step; returns true once the flow has converged.
    fn step(&mut self) -> Result<bool, EvolutionError> {
        let dt = self.params.dt;
        let (r, halvings) = match advance(self.spec, &self.w, dt, &self.params, self.stepper, 0) {
            Ok(v) => v,
            Err((halvings, last)) => {
                return Err(EvolutionError::Step {
                    time: self.time,
                    halvings,
                    residual: f64::NAN,
                    last: Box::new(Field::new(self.spec.grid().clone(), last)?),
                })
            }
        };
        let vol = self.spec.grid().node_volume();
        self.trace.dissipation.push(dissipation_of(&self.w, &r.values, vol, dt));
        self.w = r.values;
        self.steps_done += 1;
        self.time = self.steps_done as f64 * dt;
        let field = Field::new(self.spec.grid().clone(), self.w.clone())?;
        let e = model::energy(&field, self.spec)?.regularized_total;
        self.trace.energies.push(e);
        self.trace.step_times.push(self.time);
        let residual = model::residual(&field, self.spec)?.sup_norm();
        self.trace.diagnostics.push(StepDiagnostics {
            time: self.time,
            inner_iterations: r.iterations,
            halvings,
            residual,
        });
        if self.steps_done % self.params.stride == 0 {
            let span = self.params.stride as f64 * dt;
            let delta = self
                .w
                .iter()
                .zip(&self.last_snapshot)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / span;
            if delta <= self.params.state_tol && residual <= self.params.residual_tol {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            self.last_snapshot = self.w.clone();
            self.trace.times.push(self.time);
            self.trace.snapshots.push(field);
            if self.streak >= DETECTION_WINDOW {
                self.trace.verdict = FlowVerdict::Converged { time: self.time };
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn finish(mut self) -> Result<EvolutionTrace, EvolutionError> {
        if *self.trace.times.last().unwrap() != self.time {
            self.trace.times.push(self.time);
            self.trace
                .snapshots
                .push(Field::new(self.spec.grid().clone(), self.w.clone())?);
        }
        Ok(self.trace)
    }
}

fn run(v0: &Field, spec: &ProblemSpec, params: &FlowParams, stepper: Stepper) -> Result<EvolutionTrace, EvolutionError> {
    let mut runner = Runner::new(v0, spec, params, stepper)?;
    for _ in 0..params.steps() {
        if runner.step()? {
            break;
        }
    }
    runner.finish()
}

/// Flows from `v0` until the horizon or until converged.
pub fn evolve(v0: &Field, spec: &ProblemSpec, params: &FlowParams) -> Result<EvolutionTrace, EvolutionError> {
    run(v0, spec, params, Stepper::Energy(params.scheme))
}

/// Flow with a nodal reaction in place of the energy's phase term.
pub fn evolve_with_reaction(
    v0: &Field,
    spec: &ProblemSpec,
    params: &FlowParams,
    reaction: &dyn Reaction,
) -> Result<EvolutionTrace, EvolutionError> {
    run(v0, spec, params, Stepper::Nodal(reaction))
}

/// Residuals of the energy identity `D(0,t) + J(t) = J(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    /// At each snapshot after the first: `|D(0,t) + J(t) - J(0)|`.
    pub snapshot_residuals: Vec<f64>,
    /// Residual at the final step.
    pub trace_residual: f64,
    /// Largest single-step energy increase, `max(J(t+dt) - J(t), 0)`.
    pub max_energy_increase: f64,
    /// Largest `max(J(t+dt) + D(t,t+dt)/2 - J(t), 0)`. The implicit step
    /// minimizes `J + |w - w(t)|²/(2dt)`, so this is zero up to round-off
    /// whatever the step size.
    pub max_step_defect: f64,
    pub initial_energy: f64,
}

pub fn dissipation_report(trace: &EvolutionTrace) -> Result<DissipationReport, EvolutionError> {
    if trace.snapshots.len() < 2 {
        return Err(EvolutionError::ShortTrace);
    }
    let j0 = trace.energies[0];
    let mut acc = 0.0;
    let mut cumulative = vec![0.0];
    for d in &trace.dissipation {
        acc += d;
        cumulative.push(acc);
    }
    let at = |k: usize| (cumulative[k] + trace.energies[k] - j0).abs();
    let mut snapshot_residuals = Vec::new();
    let mut k = 0;
    for &t in trace.times.iter().skip(1) {
        while k < trace.step_times.len() && trace.step_times[k] < t {
            k += 1;
        }
        snapshot_residuals.push(at(k.min(trace.step_times.len() - 1)));
    }
    let max_energy_increase = trace
        .energies
        .windows(2)
        .map(|e| (e[1] - e[0]).max(0.0))
        .fold(0.0, f64::max);
    let max_step_defect = trace
        .energies
        .windows(2)
        .zip(&trace.dissipation)
        .map(|(e, d)| (e[1] + 0.5 * d - e[0]).max(0.0))
        .fold(0.0, f64::max);
    Ok(DissipationReport {
        snapshot_residuals,
        trace_residual: at(trace.energies.len() - 1),
        max_energy_increase,
        max_step_defect,
        initial_energy: j0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `max (w_low - w_high)⁺` over all steps and nodes.
    pub max_violation: f64,
    pub violation_time: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub steps: usize,
    /// Lipschitz constant K of the reaction.
    pub lipschitz: f64,
    /// `dt · K`; the implicit step is order preserving when this is below 1.
    pub step_lipschitz: f64,
}

fn compare(
    low: &Field,
    high: &Field,
    spec: &ProblemSpec,
    params: &FlowParams,
    stepper: Stepper,
    lipschitz: f64,
) -> Result<ComparisonReport, EvolutionError> {
    for (node, (a, b)) in low.values().iter().zip(high.values()).enumerate() {
        if a > b {
            return Err(EvolutionError::Unordered { node, low: *a, high: *b });
        }
    }
    let mut lo = Runner::new(low, spec, params, stepper)?;
    let mut hi = Runner::new(high, spec, params, stepper)?;
    let violation = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).max(0.0)).fold(0.0, f64::max);
    let mut worst = violation(&lo.w, &hi.w);
    let mut when = 0.0;
    let mut steps = 0;
    let (mut lo_done, mut hi_done) = (false, false);
    for _ in 0..params.steps() {
        let (a, b) = rayon::join(
            || if lo_done { Ok(true) } else { lo.step() },
            || if hi_done { Ok(true) } else { hi.step() },
        );
        lo_done = a?;
        hi_done = b?;
        steps += 1;
        let v = violation(&lo.w, &hi.w);
        if v > worst {
            worst = v;
            when = lo.time.max(hi.time);
        }
        if lo_done && hi_done {
            break;
        }
    }
    let tolerance = 10.0 * params.state_tol;
    Ok(ComparisonReport {
        max_violation: worst,
        violation_time: when,
        tolerance,
        passed: worst <= tolerance,
        steps,
        lipschitz,
        step_lipschitz: params.dt * lipschitz,
    })
}

/// Evolves an ordered pair of initial states side by side and reports the
/// largest violation of the ordering.
pub fn comparison_check(
    v0_low: &Field,
    v0_high: &Field,
    spec: &ProblemSpec,
    params: &FlowParams,
) -> Result<ComparisonReport, EvolutionError> {
    compare(v0_low, v0_high, spec, params, Stepper::Energy(params.scheme), spec.reaction_lipschitz())
}

pub fn comparison_check_with_reaction(
    v0_low: &Field,
    v0_high: &Field,
    spec: &ProblemSpec,
    params: &FlowParams,
    reaction: &dyn Reaction,
) -> Result<ComparisonReport, EvolutionError> {
    compare(v0_low, v0_high, spec, params, Stepper::Nodal(reaction), reaction.lipschitz())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LimitVerdict {
    Matched {
        index: usize,
        classification: Classification,
        distance: f64,
    },
    NotMatched {
        nearest: usize,
        distance: f64,
    },
}

/// The candidate within `tol` (sup-norm) of the final state of a converged
/// trace.
pub fn classify_limit(
    trace: &EvolutionTrace,
    candidates: &[SolveReport],
    tol: f64,
) -> Result<LimitVerdict, EvolutionError> {
    if !trace.converged() {
        return Err(EvolutionError::NotConverged);
    }
    classify_state(trace.last(), candidates, tol)
}

/// As [`classify_limit`] for a single state, without the convergence check.
pub fn classify_state(state: &Field, candidates: &[SolveReport], tol: f64) -> Result<LimitVerdict, EvolutionError> {
    let dist: Vec<f64> = candidates.iter().map(|c| c.field.sup_distance(state)).collect();
    let within: Vec<usize> = (0..dist.len()).filter(|&i| dist[i] <= tol).collect();
    match within.len() {
        0 => {
            let nearest = (0..dist.len())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                .unwrap_or(0);
            Ok(LimitVerdict::NotMatched {
                nearest,
                distance: dist.get(nearest).copied().unwrap_or(f64::INFINITY),
            })
        }
        1 => Ok(LimitVerdict::Matched {
            index: within[0],
            classification: candidates[within[0]].classification,
            distance: dist[within[0]],
        }),
        count => Err(EvolutionError::Ambiguous { count, tol }),
    }
}

/// Smooth random boundary-vanishing field: random coefficients on the
/// lowest discrete sine modes, normalized to unit sup-norm.
pub fn smooth_random_field(spec: &ProblemSpec, modes: usize, rng: &mut impl Rng) -> Result<Field, GridError> {
    let grid = spec.grid();
    let ext = grid.extent().to_vec();
    let dim = grid.dimension();
    let mut terms = Vec::new();
    if dim == 1 {
        for k in 1..=modes {
            terms.push((k, 0usize, rng.gen_range(-1.0..1.0)));
        }
    } else {
        // the `modes` pairs with the smallest k² + l²
        let mut pairs: Vec<(usize, usize)> = (1..=modes).flat_map(|k| (1..=modes).map(move |l| (k, l))).collect();
        pairs.sort_by_key(|&(k, l)| (k * k + l * l, k));
        for (k, l) in pairs.into_iter().take(modes) {
            terms.push((k, l, rng.gen_range(-1.0..1.0)));
        }
    }
    let pi = std::f64::consts::PI;
    let mut f = Field::from_fn(grid.clone(), |x| {
        terms
            .iter()
            .map(|&(k, l, c)| {
                let sx = (k as f64 * pi * x[0] / ext[0]).sin();
                let sy = if dim == 2 { (l as f64 * pi * x[1] / ext[1]).sin() } else { 1.0 };
                c * sx * sy
            })
            .sum()
    })?;
    let mut v = f.values().to_vec();
    for &n in grid.boundary() {
        v[n] = 0.0;
    }
    let s = sup_norm(&v);
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    f = Field::new(grid.clone(), v)?;
    Ok(f)
}

/// Initial state near a saddle with lower energy: `u₁ ± s d` along the path
/// tangent through its maximum, with `‖s d‖_∞ = δ/2`.
pub fn destabilize_saddle(
    u1: &SolveReport,
    spec: &ProblemSpec,
    delta: f64,
    path: &PathState,
) -> Result<Field, EvolutionError> {
    destabilize(u1, spec, delta, path, None)
}

/// As [`destabilize_saddle`], mixing a seeded smooth random component into
/// the direction.
pub fn destabilize_saddle_seeded(
    u1: &SolveReport,
    spec: &ProblemSpec,
    delta: f64,
    path: &PathState,
    seed: u64,
) -> Result<Field, EvolutionError> {
    destabilize(u1, spec, delta, path, Some(seed))
}

fn destabilize(
    u1: &SolveReport,
    spec: &ProblemSpec,
    delta: f64,
    path: &PathState,
    seed: Option<u64>,
) -> Result<Field, EvolutionError> {
    if u1.classification != Classification::Saddle {
        return Err(EvolutionError::NotSaddle(u1.classification));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(EvolutionError::Param { name: "delta", value: delta });
    }
    let mut dir = path.tangent(path.max_index);
    let s = sup_norm(&dir);
    if s == 0.0 {
        return Err(EvolutionError::NoDescent);
    }
    dir.iter_mut().for_each(|v| *v /= s);
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = smooth_random_field(spec, 8, &mut rng)?;
        for (d, x) in dir.iter_mut().zip(r.values()) {
            *d += 0.25 * x;
        }
        let s = sup_norm(&dir);
        dir.iter_mut().for_each(|v| *v /= s);
    }
    let j1 = u1.energy.total;
    let mut scale = 0.5 * delta;
    for _ in 0..20 {
        let mut best: Option<(Field, f64)> = None;
        for sign in [1.0, -1.0] {
            let vals: Vec<f64> = u1.field.values().iter().zip(&dir).map(|(u, d)| u + sign * scale * d).collect();
            let f = Field::new(spec.grid().clone(), vals)?;
            let e = model::energy(&f, spec)?.total;
            if e < j1 && best.as_ref().is_none_or(|(_, be)| e < *be) {
                best = Some((f, e));
            }
        }
        if let Some((f, _)) = best {
            return Ok(f);
        }
        scale *= 0.5;
    }
    Err(EvolutionError::NoDescent)
}
