// Cellwise assembly of the discrete energy, its gradient and Hessian.

use crate::linalg::BandMatrix;

use super::{EnergyBreakdown, ProblemSpec};

/// `(1/p)(reg + |g|²)^(p/2)`
#[inline]
fn density(g2: f64, p: f64, reg: f64) -> f64 {
    (reg + g2).powf(0.5 * p) / p
}

/// Coefficient `(reg + |g|²)^(p/2 - 1)` of the flux; zero flux at zero
/// gradient when the coefficient itself is singular.
#[inline]
pub(crate) fn flux_coeff(g2: f64, p: f64, reg: f64) -> f64 {
    let s = reg + g2;
    if s == 0.0 && p < 2.0 {
        0.0
    } else {
        s.powf(0.5 * p - 1.0)
    }
}

pub(crate) fn energy_breakdown(u: &[f64], spec: &ProblemSpec) -> EnergyBreakdown {
    let grid = spec.grid();
    let p = spec.p();
    let reg = spec.eps_reg();
    let mut dir = 0.0;
    let mut dir_reg = 0.0;
    let mut phase = 0.0;
    for c in 0..grid.cell_count() {
        let g = grid.cell_gradient(u, c);
        let g2 = g[0] * g[0] + g[1] * g[1];
        dir += density(g2, p, 0.0);
        dir_reg += density(g2, p, reg);
        phase += spec.cell_q()[c] * spec.gamma_eps(grid.cell_average(u, c));
    }
    let vol = grid.cell_volume();
    let (dir, dir_reg, phase) = (dir * vol, dir_reg * vol, phase * vol);
    EnergyBreakdown {
        dirichlet: dir,
        phase,
        total: dir + phase,
        regularized_total: dir_reg + phase,
    }
}

pub(crate) fn regularized_total(u: &[f64], spec: &ProblemSpec, with_phase: bool) -> f64 {
    let grid = spec.grid();
    let p = spec.p();
    let reg = spec.eps_reg();
    let mut acc = 0.0;
    for c in 0..grid.cell_count() {
        let g = grid.cell_gradient(u, c);
        acc += density(g[0] * g[0] + g[1] * g[1], p, reg);
        if with_phase {
            acc += spec.cell_q()[c] * spec.gamma_eps(grid.cell_average(u, c));
        }
    }
    acc * grid.cell_volume()
}

/// `∂J/∂u_k` for every node (boundary nodes included).
pub(crate) fn full_gradient(u: &[f64], spec: &ProblemSpec, with_phase: bool) -> Vec<f64> {
    let grid = spec.grid();
    let p = spec.p();
    let reg = spec.eps_reg();
    let st = grid.gradient_stencil();
    let nc = grid.corners();
    let w = 1.0 / nc as f64;
    let vol = grid.cell_volume();
    let mut out = vec![0.0; u.len()];
    for (c, nodes) in grid.cells().iter().enumerate() {
        let g = grid.cell_gradient(u, c);
        let a = flux_coeff(g[0] * g[0] + g[1] * g[1], p, reg);
        let phase = if with_phase {
            spec.cell_q()[c] * spec.beta_eps(grid.cell_average(u, c)) * w
        } else {
            0.0
        };
        for k in 0..nc {
            out[nodes[k]] += vol * (a * (g[0] * st[k][0] + g[1] * st[k][1]) + phase);
        }
    }
    out
}

/// `∂/∂u_k` of the phase term alone.
pub(crate) fn phase_gradient(u: &[f64], spec: &ProblemSpec) -> Vec<f64> {
    let grid = spec.grid();
    let nc = grid.corners();
    let w = grid.cell_volume() / nc as f64;
    let mut out = vec![0.0; u.len()];
    for (c, nodes) in grid.cells().iter().enumerate() {
        let b = spec.cell_q()[c] * spec.beta_eps(grid.cell_average(u, c)) * w;
        for &n in &nodes[..nc] {
            out[n] += b;
        }
    }
    out
}

/// Index map from nodes to unknowns; nodes outside the set are held fixed.
#[derive(Debug, Clone)]
pub struct FreeSet {
    map: Vec<Option<usize>>,
    nodes: Vec<usize>,
    bandwidth: usize,
}

impl FreeSet {
    /// Free nodes in increasing node order.
    pub fn new(spec: &ProblemSpec, free: impl IntoIterator<Item = usize>) -> Self {
        let grid = spec.grid();
        let mut nodes: Vec<usize> = free.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut map = vec![None; grid.node_count()];
        for (i, &n) in nodes.iter().enumerate() {
            map[n] = Some(i);
        }
        let mut bandwidth = 0;
        for cell in grid.cells() {
            let idx: Vec<usize> = cell[..grid.corners()].iter().filter_map(|&n| map[n]).collect();
            for &a in &idx {
                for &b in &idx {
                    bandwidth = bandwidth.max(a.abs_diff(b));
                }
            }
        }
        FreeSet {
            map,
            nodes,
            bandwidth,
        }
    }

    pub fn interior(spec: &ProblemSpec) -> Self {
        Self::new(spec, spec.grid().interior().iter().copied())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn index_of(&self, node: usize) -> Option<usize> {
        self.map[node]
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| full[n]).collect()
    }

    pub fn scatter(&self, x: &[f64], full: &mut [f64]) {
        for (&n, &v) in self.nodes.iter().zip(x) {
            full[n] = v;
        }
    }
}

/// The discrete energy restricted to a set of free nodes, optionally with
/// the proximal term `(weight/2)|x - center|²` of an implicit time step.
#[derive(Debug, Clone)]
pub struct Functional<'a> {
    spec: &'a ProblemSpec,
    free: FreeSet,
    base: Vec<f64>,
    with_phase: bool,
    proximal: Option<(f64, Vec<f64>)>,
}

impl<'a> Functional<'a> {
    /// `base` supplies the values of the fixed nodes.
    pub fn new(spec: &'a ProblemSpec, free: FreeSet, base: Vec<f64>, with_phase: bool) -> Self {
        Functional {
            spec,
            free,
            base,
            with_phase,
            proximal: None,
        }
    }

    pub fn with_proximal(mut self, weight: f64, center: Vec<f64>) -> Self {
        self.proximal = Some((weight, center));
        self
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn free(&self) -> &FreeSet {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Free values read from the base field.
    pub fn initial(&self) -> Vec<f64> {
        self.free.gather(&self.base)
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        self.free.scatter(x, &mut full);
        full
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let full = self.expand(x);
        let mut v = regularized_total(&full, self.spec, self.with_phase);
        if let Some((w, c)) = &self.proximal {
            v += 0.5 * w * x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let full = self.expand(x);
        let g = full_gradient(&full, self.spec, self.with_phase);
        let mut out = self.free.gather(&g);
        if let Some((w, c)) = &self.proximal {
            for ((o, a), b) in out.iter_mut().zip(x).zip(c) {
                *o += w * (a - b);
            }
        }
        out
    }

    /// Gradient divided by the node volume: the residual on free nodes.
    pub fn scaled_gradient(&self, x: &[f64]) -> Vec<f64> {
        let vol = self.spec.grid().node_volume();
        let mut g = self.gradient(x);
        g.iter_mut().for_each(|v| *v /= vol);
        g
    }

    pub fn hessian(&self, x: &[f64]) -> BandMatrix {
        let spec = self.spec;
        let grid = spec.grid();
        let p = spec.p();
        let reg = spec.eps_reg();
        let st = grid.gradient_stencil();
        let nc = grid.corners();
        let w = 1.0 / nc as f64;
        let vol = grid.cell_volume();
        let full = self.expand(x);
        let bw = self.free.bandwidth;
        let mut h = BandMatrix::zeros(self.free.len(), bw, bw);
        for (c, nodes) in grid.cells().iter().enumerate() {
            let idx: [Option<usize>; 4] = [
                self.free.map[nodes[0]],
                self.free.map[nodes[1]],
                if nc == 4 { self.free.map[nodes[2]] } else { None },
                if nc == 4 { self.free.map[nodes[3]] } else { None },
            ];
            if idx.iter().all(|i| i.is_none()) {
                continue;
            }
            let g = grid.cell_gradient(&full, c);
            let g2 = g[0] * g[0] + g[1] * g[1];
            let s = reg + g2;
            // Hessian of (1/p) s^(p/2) in g: s^(p/2-1) I + (p-2) s^(p/2-2) g gᵀ
            let a = flux_coeff(g2, p, reg);
            let b = if s == 0.0 { 0.0 } else { (p - 2.0) * s.powf(0.5 * p - 2.0) };
            let m = [
                [a + b * g[0] * g[0], b * g[0] * g[1]],
                [b * g[0] * g[1], a + b * g[1] * g[1]],
            ];
            let phase = if self.with_phase {
                spec.cell_q()[c] * spec.beta_eps_prime(grid.cell_average(&full, c)) * w * w
            } else {
                0.0
            };
            for k in 0..nc {
                let Some(ik) = idx[k] else { continue };
                let mk = [
                    m[0][0] * st[k][0] + m[0][1] * st[k][1],
                    m[1][0] * st[k][0] + m[1][1] * st[k][1],
                ];
                for l in 0..nc {
                    let Some(il) = idx[l] else { continue };
                    let v = mk[0] * st[l][0] + mk[1] * st[l][1] + phase;
                    h.add(ik, il, vol * v);
                }
            }
        }
        if let Some((wt, _)) = &self.proximal {
            h.add_diagonal(*wt);
        }
        h
    }
}

impl FreeSet {
    /// Stiffness matrix of `(1/2)∫|∇u|²` on the free nodes: the `p = 2`
    /// Dirichlet Hessian, independent of the state.
    pub fn stiffness(&self, spec: &ProblemSpec) -> BandMatrix {
        let grid = spec.grid();
        let st = grid.gradient_stencil();
        let nc = grid.corners();
        let vol = grid.cell_volume();
        let mut h = BandMatrix::zeros(self.len(), self.bandwidth, self.bandwidth);
        for nodes in grid.cells() {
            for k in 0..nc {
                let Some(ik) = self.map[nodes[k]] else { continue };
                for l in 0..nc {
                    let Some(il) = self.map[nodes[l]] else { continue };
                    h.add(ik, il, vol * (st[k][0] * st[l][0] + st[k][1] * st[l][1]));
                }
            }
        }
        h
    }
}
