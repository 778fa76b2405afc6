//! Steady states of the discrete energy: the trivial p-harmonic solution, the
//! global minimizer with a dead core, and the mountain-pass saddle between
//! them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridError};
use crate::linalg::{dot, norm2, sup_norm, LinalgError};
use crate::model::{energy, residual, EnergyBreakdown, FreeSet, Functional, ModelError, ProblemSpec};
use crate::optimize::{self, DescentMethod, Outcome};

#[derive(Debug, Error)]
pub enum StationaryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linear(#[from] LinalgError),
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("initial field does not carry the boundary datum (node {node}: {value} vs {expected})")]
    BoundaryMismatch { node: usize, value: f64, expected: f64 },
    #[error("collar width {delta} must lie in (0, {limit})")]
    CollarWidth { delta: f64, limit: f64 },
    #[error("collar width {0} leaves no interior node to pin at zero")]
    CollarTooNarrow(f64),
    #[error("mountain-pass premise fails: I[v2] = {0:e} is not negative (datum above threshold?)")]
    PremiseViolated(f64),
    #[error("path needs at least 3 states, got {0}")]
    PathSize(usize),
    #[error("no seeds given")]
    NoSeeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Trivial,
    Minimizer,
    Saddle,
    Unclassified,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Trivial => "trivial",
            Classification::Minimizer => "minimizer",
            Classification::Saddle => "saddle",
            Classification::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: Field,
    /// Sup-norm of the residual the solver drove to zero.
    pub residual: f64,
    pub tol: f64,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub classification: Classification,
    /// Nodes with `u < ε`.
    pub dead_core: Vec<usize>,
    pub converged: bool,
    pub failure: Option<String>,
    /// Objective after each accepted iterate.
    pub energy_history: Vec<f64>,
}

/// The scalar part of a [`SolveReport`], as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub classification: Classification,
    pub converged: bool,
    pub residual: f64,
    pub tol: f64,
    pub iterations: usize,
    pub energy: EnergyBreakdown,
    pub dead_core_nodes: usize,
    pub dead_core_volume: f64,
    pub failure: Option<String>,
}

impl SolveReport {
    fn assemble(
        spec: &ProblemSpec,
        values: Vec<f64>,
        residual: f64,
        tol: f64,
        iterations: usize,
        converged: bool,
        failure: Option<String>,
        energy_history: Vec<f64>,
    ) -> Result<Self, StationaryError> {
        let field = Field::new(spec.grid().clone(), values)?;
        let energy = energy(&field, spec)?;
        let dead_core = dead_core(&field, spec.eps());
        Ok(SolveReport {
            field,
            residual,
            tol,
            energy,
            iterations,
            classification: Classification::Unclassified,
            dead_core,
            converged,
            failure,
            energy_history,
        })
    }

    /// Volume of the dead core, counting each node's control volume.
    pub fn dead_core_volume(&self) -> f64 {
        self.dead_core.len() as f64 * self.field.grid().node_volume()
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            classification: self.classification,
            converged: self.converged,
            residual: self.residual,
            tol: self.tol,
            iterations: self.iterations,
            energy: self.energy,
            dead_core_nodes: self.dead_core.len(),
            dead_core_volume: self.dead_core_volume(),
            failure: self.failure.clone(),
        }
    }
}

pub fn dead_core(u: &Field, eps: f64) -> Vec<usize> {
    u.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < eps)
        .map(|(i, _)| i)
        .collect()
}

/// Iteration controls shared by the stationary solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub tol: f64,
    pub max_iter: usize,
    pub method: DescentMethod,
    pub path_size: usize,
    pub path_max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tol: 1e-8,
            max_iter: 5000,
            method: DescentMethod::Newton,
            path_size: 41,
            path_max_iter: 20000,
        }
    }
}

fn check_tol(tol: f64) -> Result<(), StationaryError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(StationaryError::Tolerance(tol))
    }
}

fn check_boundary(spec: &ProblemSpec, init: &Field) -> Result<(), StationaryError> {
    spec.check_grid(init)?;
    for (&node, &s) in spec.grid().boundary().iter().zip(spec.sigma()) {
        let v = init.values()[node];
        if v != s {
            return Err(StationaryError::BoundaryMismatch {
                node,
                value: v,
                expected: s,
            });
        }
    }
    Ok(())
}

/// Discrete harmonic (`p = 2`) extension of the boundary datum: one linear
/// solve, and a good starting point for every other `p`.
pub fn harmonic_extension(spec: &ProblemSpec) -> Result<Field, StationaryError> {
    let base = spec.field_with_interior(0.0).into_values();
    let free = FreeSet::interior(spec);
    let k = free.stiffness(spec);
    // K x = -(gradient of the quadratic at x = 0)
    let rhs: Vec<f64> = free
        .gather(&quadratic_gradient(spec, &base))
        .iter()
        .map(|v| -v)
        .collect();
    let x = k.cholesky_solve(&rhs)?;
    let mut values = base;
    free.scatter(&x, &mut values);
    Ok(Field::new(spec.grid().clone(), values)?)
}

/// Gradient of `(1/2)∫|∇u|²` at every node.
fn quadratic_gradient(spec: &ProblemSpec, u: &[f64]) -> Vec<f64> {
    let grid = spec.grid();
    let st = grid.gradient_stencil();
    let vol = grid.cell_volume();
    let mut out = vec![0.0; u.len()];
    for (c, nodes) in grid.cells().iter().enumerate() {
        let g = grid.cell_gradient(u, c);
        for k in 0..grid.corners() {
            out[nodes[k]] += vol * (g[0] * st[k][0] + g[1] * st[k][1]);
        }
    }
    out
}

/// Solves `-Δ_p u = 0` with `u = σ` on the boundary by damped Newton on the
/// (convex) Dirichlet energy. Boundary values of `init` are overwritten.
pub fn solve_p_harmonic(
    spec: &ProblemSpec,
    init: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, StationaryError> {
    check_tol(tol)?;
    spec.check_grid(init)?;
    let mut base = init.values().to_vec();
    spec.impose_boundary(&mut base);
    let f = Functional::new(spec, FreeSet::interior(spec), base, false);
    let out = optimize::minimize(&f, f.initial(), tol, max_iter, DescentMethod::Newton);
    let values = f.expand(&out.x);
    let mut rep = from_outcome(spec, values, tol, &out)?;
    rep.classification = if rep.converged && rep.dead_core.is_empty() {
        Classification::Trivial
    } else {
        Classification::Unclassified
    };
    Ok(rep)
}

/// `solve_p_harmonic` from the harmonic extension.
pub fn trivial_solution(spec: &ProblemSpec, tol: f64, max_iter: usize) -> Result<SolveReport, StationaryError> {
    let init = harmonic_extension(spec)?;
    solve_p_harmonic(spec, &init, tol, max_iter)
}

fn from_outcome(
    spec: &ProblemSpec,
    values: Vec<f64>,
    tol: f64,
    out: &Outcome,
) -> Result<SolveReport, StationaryError> {
    SolveReport::assemble(
        spec,
        values,
        out.residual,
        tol,
        out.iterations,
        out.converged,
        out.error.as_ref().map(|e| e.to_string()),
        out.values.clone(),
    )
}

/// Descends the full energy from `init` with the default (Newton) method.
pub fn minimize_energy(
    spec: &ProblemSpec,
    init: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, StationaryError> {
    minimize_energy_with(spec, init, tol, max_iter, DescentMethod::Newton)
}

pub fn minimize_energy_with(
    spec: &ProblemSpec,
    init: &Field,
    tol: f64,
    max_iter: usize,
    method: DescentMethod,
) -> Result<SolveReport, StationaryError> {
    check_tol(tol)?;
    check_boundary(spec, init)?;
    let f = Functional::new(spec, FreeSet::interior(spec), init.values().to_vec(), true);
    let out = optimize::minimize(&f, f.initial(), tol, max_iter, method);
    let values = f.expand(&out.x);
    let mut rep = from_outcome(spec, values, tol, &out)?;
    if rep.converged {
        rep.classification = Classification::Minimizer;
    }
    Ok(rep)
}

/// Field equal to `σ` on the boundary, zero on nodes at distance at least
/// `delta` from the boundary, and discrete p-harmonic on the collar between.
pub fn wedge_initializer(spec: &ProblemSpec, delta: f64) -> Result<Field, StationaryError> {
    let grid = spec.grid();
    let limit = 0.5 * grid.extent().iter().copied().fold(f64::INFINITY, f64::min);
    if !(delta > 0.0 && delta < limit) {
        return Err(StationaryError::CollarWidth { delta, limit });
    }
    let slack = 1e-9 * grid.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let mut base = spec.field_with_interior(0.0).into_values();
    let mut collar = Vec::new();
    let mut pinned = 0;
    for &n in grid.interior() {
        if grid.distance_to_boundary(n) >= delta - slack {
            base[n] = 0.0;
            pinned += 1;
        } else {
            collar.push(n);
        }
    }
    if pinned == 0 {
        return Err(StationaryError::CollarTooNarrow(delta));
    }
    // linear-in-distance start on the collar
    let sigma_mean = spec.sigma().iter().sum::<f64>() / spec.sigma().len() as f64;
    for &n in &collar {
        base[n] = sigma_mean * (1.0 - grid.distance_to_boundary(n) / delta).max(0.0);
    }
    let f = Functional::new(spec, FreeSet::new(spec, collar), base, false);
    let out = optimize::minimize(&f, f.initial(), 1e-11, 500, DescentMethod::Newton);
    Ok(Field::new(grid.clone(), f.expand(&out.x))?)
}

/// A discrete path from `0` to `v₂` in the space of boundary-vanishing
/// fields, with the shifted energy `I` of each state.
#[derive(Debug, Clone)]
pub struct PathState {
    pub states: Vec<Field>,
    pub energies: Vec<f64>,
    pub max_index: usize,
    /// Path maximum before each deformation step.
    pub max_history: Vec<f64>,
    /// Steps at which a state was moved up to the maximum of the polygon
    /// through its neighbours; the maximum can only grow at these steps.
    pub refinements: Vec<usize>,
}

impl PathState {
    /// Recomputes `I` for every state against `u0`.
    pub fn recompute_energies(&self, u0: &Field, spec: &ProblemSpec) -> Result<Vec<f64>, ModelError> {
        self.states
            .iter()
            .map(|v| crate::model::shifted_energy(v, u0, spec))
            .collect()
    }

    /// Unit Euclidean tangent through state `k` (central difference).
    pub fn tangent(&self, k: usize) -> Vec<f64> {
        let last = self.states.len() - 1;
        let (a, b) = (k.saturating_sub(1), (k + 1).min(last));
        let mut t: Vec<f64> = self.states[b]
            .values()
            .iter()
            .zip(self.states[a].values())
            .map(|(x, y)| x - y)
            .collect();
        let n = norm2(&t);
        if n > 0.0 {
            t.iter_mut().for_each(|v| *v /= n);
        }
        t
    }
}

struct PathWork<'a> {
    f: Functional<'a>,
    base_value: f64,
    xs: Vec<Vec<f64>>,
    es: Vec<f64>,
}

impl PathWork<'_> {
    fn shifted(&self, x: &[f64]) -> f64 {
        self.f.value(x) - self.base_value
    }

    fn argmax(&self) -> usize {
        let mut k = 0;
        for (i, e) in self.es.iter().enumerate() {
            if *e > self.es[k] {
                k = i;
            }
        }
        k
    }

    fn path_max(&self) -> f64 {
        self.es.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn arc_length(&self) -> f64 {
        self.xs
            .windows(2)
            .map(|p| p[1].iter().zip(&p[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .sum()
    }

    /// Highest point of the segment from `xa` to `xb`.
    fn segment_max(&self, xa: &[f64], xb: &[f64]) -> (Vec<f64>, f64) {
        let at = |t: f64| -> Vec<f64> { xa.iter().zip(xb).map(|(p, q)| p + t * (q - p)).collect() };
        // the ridge can be a narrow spike: bracket on a fine sample first
        const SAMPLES: usize = 64;
        let mut tb = 0.0;
        let mut eb = f64::NEG_INFINITY;
        for i in 0..=SAMPLES {
            let t = i as f64 / SAMPLES as f64;
            let e = self.shifted(&at(t));
            if e > eb {
                eb = e;
                tb = t;
            }
        }
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let h = 1.0 / SAMPLES as f64;
        let (mut lo, mut hi) = ((tb - h).max(0.0), (tb + h).min(1.0));
        let mut t1 = hi - r * (hi - lo);
        let mut t2 = lo + r * (hi - lo);
        let mut e1 = self.shifted(&at(t1));
        let mut e2 = self.shifted(&at(t2));
        while hi - lo > 1e-10 {
            if e1 > e2 {
                hi = t2;
                t2 = t1;
                e2 = e1;
                t1 = hi - r * (hi - lo);
                e1 = self.shifted(&at(t1));
            } else {
                lo = t1;
                t1 = t2;
                e1 = e2;
                t2 = lo + r * (hi - lo);
                e2 = self.shifted(&at(t2));
            }
        }
        let x = at(0.5 * (lo + hi));
        let e = self.shifted(&x);
        (x, e)
    }

    /// Replaces state `k` by the highest point of the chord between its
    /// neighbours when that point is lower: cuts a corner of the path.
    fn cut_corner(&mut self, k: usize, noise: f64) -> bool {
        let (x, e) = self.segment_max(&self.xs[k - 1], &self.xs[k + 1]);
        if e.max(self.es[k - 1]).max(self.es[k + 1]) < self.es[k] - noise {
            self.xs[k] = x;
            self.es[k] = e;
            true
        } else {
            false
        }
    }

    /// Moves state `k` to the highest point of the two polygon segments
    /// through it, if that is higher by more than `noise`.
    fn lift_to_segment_max(&mut self, k: usize, noise: f64) -> bool {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for (a, b) in [(k - 1, k), (k, k + 1)] {
            let (x, e) = self.segment_max(&self.xs[a], &self.xs[b]);
            if e > self.es[k] + noise && best.as_ref().is_none_or(|(_, be)| e > *be) {
                best = Some((x, e));
            }
        }
        match best {
            Some((x, e)) => {
                self.xs[k] = x;
                self.es[k] = e;
                true
            }
            None => false,
        }
    }

    /// Equal arc-length spacing of the states strictly between `a` and `b`.
    fn redistribute(&mut self, a: usize, b: usize) {
        if b <= a + 1 {
            return;
        }
        let seg: Vec<f64> = (a..b)
            .map(|i| {
                let d: Vec<f64> = self.xs[i + 1].iter().zip(&self.xs[i]).map(|(p, q)| p - q).collect();
                norm2(&d)
            })
            .collect();
        let total: f64 = seg.iter().sum();
        if total <= 0.0 {
            return;
        }
        let old: Vec<Vec<f64>> = self.xs[a..=b].to_vec();
        let mut j = 0;
        let mut acc = 0.0;
        for i in a + 1..b {
            let target = total * (i - a) as f64 / (b - a) as f64;
            while j + 1 < seg.len() && acc + seg[j] < target {
                acc += seg[j];
                j += 1;
            }
            let t = if seg[j] > 0.0 { ((target - acc) / seg[j]).clamp(0.0, 1.0) } else { 0.0 };
            self.xs[i] = old[j].iter().zip(&old[j + 1]).map(|(p, q)| p + t * (q - p)).collect();
            self.es[i] = self.shifted(&self.xs[i]);
        }
    }
}

/// Mountain-pass saddle between `u₀` and `u₂` by path deformation.
///
/// The path starts as the segment `t v₂`, `v₂ = u₂ - u₀`. Each step moves the
/// highest state downhill along a direction that excludes the path tangent,
/// preconditioned by the Laplacian stiffness; states on either side are
/// periodically respaced by arc length. Once the maximum is near a critical
/// point, Newton's method on the residual finishes the solve.
pub fn mountain_pass(
    spec: &ProblemSpec,
    u0: &SolveReport,
    u2: &SolveReport,
    path_size: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(SolveReport, PathState), StationaryError> {
    check_tol(tol)?;
    if path_size < 3 {
        return Err(StationaryError::PathSize(path_size));
    }
    spec.check_grid(&u0.field)?;
    spec.check_grid(&u2.field)?;
    let free = FreeSet::interior(spec);
    let stiff = free.stiffness(spec).cholesky()?;
    let f = Functional::new(spec, free, u0.field.values().to_vec(), true);
    let x0 = f.initial();
    let v2: Vec<f64> = f
        .free()
        .gather(u2.field.values())
        .iter()
        .zip(&x0)
        .map(|(a, b)| a - b)
        .collect();
    let base_value = f.value(&x0);
    let mut w = PathWork {
        f,
        base_value,
        xs: Vec::with_capacity(path_size),
        es: Vec::with_capacity(path_size),
    };
    let shift_of = |x: &[f64]| -> Vec<f64> { x.iter().zip(&x0).map(|(a, b)| a + b).collect() };
    let i_v2 = w.shifted(&shift_of(&v2));
    if i_v2 >= 0.0 {
        return Err(StationaryError::PremiseViolated(i_v2));
    }
    // path states hold u0 + v on the free nodes
    for k in 0..path_size {
        let t = k as f64 / (path_size - 1) as f64;
        let x: Vec<f64> = x0.iter().zip(&v2).map(|(a, b)| a + t * b).collect();
        w.es.push(if k == 0 { 0.0 } else { w.shifted(&x) });
        w.xs.push(x);
    }
    *w.es.last_mut().unwrap() = i_v2;

    let vol = spec.grid().node_volume();
    let margin = 10.0 * tol;
    let v2_sup = sup_norm(&v2);
    let mut max_history = Vec::new();
    let mut alpha: f64 = 1.0;
    let noise = 1e-12 * (1.0 + base_value.abs());
    let mut refinements = Vec::new();
    let mut last_polish = f64::INFINITY;
    let mut iterations = 0;
    let mut found: Option<Outcome> = None;
    let mut failure: Option<String> = None;

    let try_polish = |w: &PathWork, x: &[f64]| -> Option<Outcome> {
        let out = optimize::newton_critical_point(&w.f, x.to_vec(), tol, 40);
        if !out.converged {
            return None;
        }
        let d0 = out.x.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d2 = out
            .x
            .iter()
            .zip(&x0)
            .zip(&v2)
            .map(|((a, b), c)| (a - b - c).abs())
            .fold(0.0, f64::max);
        let level = w.shifted(&out.x);
        let distinct = d0 > 10.0 * tol && d2 > 10.0 * tol && d0 < 2.0 * v2_sup + 1.0;
        (distinct && level > margin).then_some(out)
    };

    for it in 0..max_iter {
        iterations = it;
        let k = w.argmax();
        max_history.push(w.es[k]);
        if k == 0 || k == path_size - 1 {
            failure = Some(format!("path maximum collapsed onto endpoint {k}"));
            break;
        }
        let x = w.xs[k].clone();
        let g = w.f.gradient(&x);
        let r = sup_norm(&g) / vol;
        if r <= 0.1 * last_polish || r <= tol {
            last_polish = r;
            if let Some(out) = try_polish(&w, &x) {
                found = Some(out);
                break;
            }
        }
        // preconditioned direction with the tangent removed in the M-inner product
        let tau = {
            let d: Vec<f64> = w.xs[k + 1].iter().zip(&w.xs[k - 1]).map(|(a, b)| a - b).collect();
            let n = norm2(&d);
            d.into_iter().map(|v| v / n.max(1e-300)).collect::<Vec<f64>>()
        };
        let mg = stiff.solve(&g)?;
        let mtau = stiff.solve(&tau)?;
        let c = dot(&tau, &mg) / dot(&tau, &mtau).max(1e-300);
        let dir: Vec<f64> = mg.iter().zip(&mtau).map(|(a, b)| -(a - c * b)).collect();
        let slope = dot(&g, &dir);
        if slope >= 0.0 {
            failure = Some("no descent direction transverse to the path".into());
            break;
        }
        let e0 = w.es[k];
        // keep the path continuous: no state moves farther than half the
        // mean spacing in one step
        let spacing = w.arc_length() / (path_size - 1) as f64;
        let cap = 0.5 * spacing / norm2(&dir).max(1e-300);
        let mut step = (alpha * 2.0).min(cap);
        let mut gain = 0.0;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let e = w.shifted(&trial);
            if e <= e0 + 1e-4 * step * slope && e < e0 {
                w.xs[k] = trial;
                w.es[k] = e;
                gain = e0 - e;
                break;
            }
            step *= 0.5;
        }
        if gain <= noise {
            // The state is transversally minimal but the path still climbs
            // between states: move it to the polygon's maximum nearby.
            if w.cut_corner(k, noise) {
                continue;
            }
            refinements.push(it);
            if !w.lift_to_segment_max(k, noise) {
                if let Some(out) = try_polish(&w, &w.xs[k]) {
                    found = Some(out);
                } else {
                    failure = Some(format!("path deformation stalled at residual {r:e}"));
                }
                break;
            }
            last_polish = f64::INFINITY;
            continue;
        }
        alpha = step;
        if it % 10 == 9 {
            let before = w.path_max();
            let saved = (w.xs.clone(), w.es.clone());
            let k = w.argmax();
            w.redistribute(0, k);
            w.redistribute(k, path_size - 1);
            if w.path_max() > before {
                w.xs = saved.0;
                w.es = saved.1;
            }
        }
    }
    if found.is_none() && failure.is_none() {
        let k = w.argmax();
        found = try_polish(&w, &w.xs[k].clone());
        if found.is_none() {
            failure = Some(format!("no saddle after {max_iter} path iterations"));
        }
    }

    let k = w.argmax();
    let grid = spec.grid().clone();
    let states = w
        .xs
        .iter()
        .map(|x| {
            let full = w.f.expand(x);
            let vals: Vec<f64> = full.iter().zip(u0.field.values()).map(|(a, b)| a - b).collect();
            Field::new(grid.clone(), vals)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let path = PathState {
        states,
        energies: w.es.clone(),
        max_index: k,
        max_history,
        refinements,
    };

    let (values, polish_iters, history) = match &found {
        Some(out) => (w.f.expand(&out.x), out.iterations, out.values.clone()),
        None => (w.f.expand(&w.xs[k]), 0, Vec::new()),
    };
    let field = Field::new(grid, values.clone())?;
    let res = residual(&field, spec)?.sup_norm();
    let mut rep = SolveReport::assemble(
        spec,
        values,
        res,
        tol,
        iterations + polish_iters,
        found.is_some(),
        failure,
        history,
    )?;
    if rep.converged {
        let ordered = u2.energy.total <= u0.energy.total && u0.energy.total < rep.energy.total;
        if ordered && res <= tol {
            rep.classification = Classification::Saddle;
        } else {
            rep.converged = false;
            rep.failure = Some(format!(
                "critical point violates J(u2) <= J(u0) < J(u1): {} {} {}",
                u2.energy.total, u0.energy.total, rep.energy.total
            ));
        }
    }
    Ok((rep, path))
}

/// Outcome of [`multistart_minimize`].
#[derive(Debug, Clone)]
pub struct Multistart {
    /// Distinct converged critical points, lowest energy first.
    pub reports: Vec<SolveReport>,
    /// Seeds whose descent did not converge, with their reports.
    pub failures: Vec<(usize, SolveReport)>,
    /// Seeds rejected before solving (wrong grid or boundary).
    pub errors: Vec<(usize, String)>,
}

/// Minimizes from every seed concurrently and keeps the distinct results.
pub fn multistart_minimize(
    spec: &ProblemSpec,
    seeds: &[Field],
    tol: f64,
    max_iter: usize,
    method: DescentMethod,
) -> Result<Multistart, StationaryError> {
    check_tol(tol)?;
    if seeds.is_empty() {
        return Err(StationaryError::NoSeeds);
    }
    let results: Vec<Result<SolveReport, StationaryError>> = seeds
        .par_iter()
        .map(|s| minimize_energy_with(spec, s, tol, max_iter, method))
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) if rep.converged => ok.push(rep),
            Ok(rep) => failures.push((i, rep)),
            Err(e) => errors.push((i, e.to_string())),
        }
    }
    let mut reports: Vec<SolveReport> = Vec::new();
    for rep in ok {
        let dup = reports
            .iter()
            .any(|r| r.field.sup_distance(&rep.field) <= 10.0 * tol);
        if !dup {
            reports.push(rep);
        }
    }
    reports.sort_by(|a, b| a.energy.total.total_cmp(&b.energy.total));
    Ok(Multistart {
        reports,
        failures,
        errors,
    })
}

/// Seeds for the global minimizer: `u₀` and wedges of several collar widths.
pub fn default_seeds(spec: &ProblemSpec, u0: &Field) -> Vec<Field> {
    let grid = spec.grid();
    let half = 0.5 * grid.extent().iter().copied().fold(f64::INFINITY, f64::min);
    let mut seeds = vec![u0.clone()];
    for frac in [0.05, 0.1, 0.2, 0.4, 0.7] {
        if let Ok(w) = wedge_initializer(spec, frac * half) {
            seeds.push(w);
        }
    }
    seeds
}

/// `u₀`, the lowest-energy multistart minimizer `u₂`, and, when `u₂` lies
/// strictly below `u₀`, the mountain-pass solution `u₁`.
#[derive(Debug, Clone)]
pub struct ThreeSolutions {
    pub u0: SolveReport,
    pub u2: SolveReport,
    pub minimizers: Vec<SolveReport>,
    /// Minimizer seeds whose descent stopped short of the tolerance.
    pub unconverged: Vec<usize>,
    pub saddle: Option<Result<(SolveReport, PathState), String>>,
    pub premise: bool,
}

pub fn three_solutions(spec: &ProblemSpec, params: &SolverParams) -> Result<ThreeSolutions, StationaryError> {
    let u0 = trivial_solution(spec, params.tol, params.max_iter)?;
    let seeds = default_seeds(spec, &u0.field);
    let mut ms = multistart_minimize(spec, &seeds, params.tol, params.max_iter, params.method)?;
    for r in ms.reports.iter_mut() {
        if r.field.sup_distance(&u0.field) <= 10.0 * params.tol {
            r.classification = Classification::Trivial;
        }
    }
    let u2 = ms.reports.first().cloned().unwrap_or_else(|| u0.clone());
    let premise = u2.energy.regularized_total < u0.energy.regularized_total - 10.0 * params.tol;
    let saddle = premise.then(|| {
        mountain_pass(spec, &u0, &u2, params.path_size, params.tol, params.path_max_iter)
            .map_err(|e| e.to_string())
    });
    Ok(ThreeSolutions {
        u0,
        u2,
        minimizers: ms.reports,
        unconverged: ms.failures.iter().map(|(i, _)| *i).collect(),
        saddle,
        premise,
    })
}
