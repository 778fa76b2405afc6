//! The singularly perturbed one-phase energy
//! `J(u) = ∫ (1/p)|∇u|^p + Q Γ_ε(u)` on a grid, its exact discrete gradient
//! (the Euler–Lagrange residual) and the p-Laplacian inequality oracles.

pub(crate) mod discrete;
pub mod inequality;
mod profile;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid, GridError};

pub use discrete::{FreeSet, Functional};
pub use inequality::{inequality_oracle, InequalityReport};
pub use profile::PhaseProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("exponent p must satisfy 1 < p < inf, got {0}")]
    Exponent(f64),
    #[error("phase width eps must be finite and positive, got {0}")]
    PhaseWidth(f64),
    #[error("weight Q must be finite and strictly positive (min {0})")]
    Weight(f64),
    #[error("boundary datum sigma must be finite and strictly positive (min {0})")]
    Datum(f64),
    #[error("regularizer eps_reg must be finite and >= 0, and > 0 when p < 2 (got {0})")]
    Regularizer(f64),
    #[error("expected {expected} values for {what}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("field lives on a different grid than the problem")]
    GridMismatch,
    #[error("perturbation is nonzero ({value:e}) at boundary node {node}")]
    BoundaryNotZero { node: usize, value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Everything that defines the discrete energy on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    grid: Arc<Grid>,
    p: f64,
    eps: f64,
    q: Vec<f64>,
    cell_q: Vec<f64>,
    sigma: Vec<f64>,
    profile: PhaseProfile,
    eps_reg: f64,
}

/// Default degeneracy regularizer: needed only where `|∇u|^(p-2)` is singular.
pub fn default_eps_reg(p: f64) -> f64 {
    if p < 2.0 {
        1e-10
    } else {
        0.0
    }
}

impl ProblemSpec {
    /// Problem with constant weight `Q ≡ 1`, constant datum `sigma`, the
    /// smooth-step profile and the default regularizer for `p`.
    pub fn new(grid: Arc<Grid>, p: f64, eps: f64, sigma: f64) -> Result<Self, ModelError> {
        let nb = grid.boundary().len();
        let nn = grid.node_count();
        Self::from_parts(
            grid,
            p,
            eps,
            vec![1.0; nn],
            vec![sigma; nb],
            PhaseProfile::SmoothStep,
            default_eps_reg(p),
        )
    }

    pub fn from_parts(
        grid: Arc<Grid>,
        p: f64,
        eps: f64,
        q: Vec<f64>,
        sigma: Vec<f64>,
        profile: PhaseProfile,
        eps_reg: f64,
    ) -> Result<Self, ModelError> {
        if !(p.is_finite() && p > 1.0) {
            return Err(ModelError::Exponent(p));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(ModelError::PhaseWidth(eps));
        }
        if q.len() != grid.node_count() {
            return Err(ModelError::Length {
                what: "Q",
                expected: grid.node_count(),
                got: q.len(),
            });
        }
        let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
        if !(qmin > 0.0) || q.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Weight(qmin));
        }
        if sigma.len() != grid.boundary().len() {
            return Err(ModelError::Length {
                what: "sigma",
                expected: grid.boundary().len(),
                got: sigma.len(),
            });
        }
        let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        if !(smin > 0.0) || sigma.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Datum(smin));
        }
        if !(eps_reg.is_finite() && eps_reg >= 0.0) || (p < 2.0 && eps_reg == 0.0) {
            return Err(ModelError::Regularizer(eps_reg));
        }
        let cell_q = (0..grid.cell_count()).map(|c| grid.cell_average(&q, c)).collect();
        Ok(ProblemSpec {
            grid,
            p,
            eps,
            q,
            cell_q,
            sigma,
            profile,
            eps_reg,
        })
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, ModelError> {
        self.with_sigma_values(vec![sigma; self.grid.boundary().len()])
    }

    pub fn with_sigma_values(&self, sigma: Vec<f64>) -> Result<Self, ModelError> {
        Self::from_parts(
            self.grid.clone(),
            self.p,
            self.eps,
            self.q.clone(),
            sigma,
            self.profile,
            self.eps_reg,
        )
    }

    pub fn with_q(&self, q: Vec<f64>) -> Result<Self, ModelError> {
        Self::from_parts(
            self.grid.clone(),
            self.p,
            self.eps,
            q,
            self.sigma.clone(),
            self.profile,
            self.eps_reg,
        )
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, ModelError> {
        Self::from_parts(
            self.grid.clone(),
            self.p,
            eps,
            self.q.clone(),
            self.sigma.clone(),
            self.profile,
            self.eps_reg,
        )
    }

    pub fn with_eps_reg(&self, eps_reg: f64) -> Result<Self, ModelError> {
        Self::from_parts(
            self.grid.clone(),
            self.p,
            self.eps,
            self.q.clone(),
            self.sigma.clone(),
            self.profile,
            eps_reg,
        )
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn eps_reg(&self) -> f64 {
        self.eps_reg
    }
    pub fn profile(&self) -> PhaseProfile {
        self.profile
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub(crate) fn cell_q(&self) -> &[f64] {
        &self.cell_q
    }
    /// Boundary datum, one value per node of `grid().boundary()`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
    pub fn sigma_min(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Γ_ε(s) = Γ(s/ε)`.
    pub fn gamma_eps(&self, s: f64) -> f64 {
        self.profile.gamma(s / self.eps)
    }

    /// `β_ε(s) = Γ_ε'(s) = β(s/ε)/ε`.
    pub fn beta_eps(&self, s: f64) -> f64 {
        self.profile.beta(s / self.eps) / self.eps
    }

    pub fn beta_eps_prime(&self, s: f64) -> f64 {
        self.profile.beta_prime(s / self.eps) / (self.eps * self.eps)
    }

    /// Lipschitz bound of `w -> Q β_ε(w)`: `sup Q · sup|β'| / ε²`.
    pub fn reaction_lipschitz(&self) -> f64 {
        let qmax = self.q.iter().copied().fold(0.0, f64::max);
        qmax * self.profile.beta_prime_sup() / (self.eps * self.eps)
    }

    /// Overwrites the boundary entries of `values` with the datum.
    pub fn impose_boundary(&self, values: &mut [f64]) {
        for (&node, &s) in self.grid.boundary().iter().zip(&self.sigma) {
            values[node] = s;
        }
    }

    pub fn satisfies_boundary(&self, f: &Field) -> bool {
        self.grid
            .boundary()
            .iter()
            .zip(&self.sigma)
            .all(|(&n, &s)| f.values()[n] == s)
    }

    /// Field equal to the datum on the boundary and `interior` inside.
    pub fn field_with_interior(&self, interior: f64) -> Field {
        let mut v = vec![interior; self.grid.node_count()];
        self.impose_boundary(&mut v);
        Field::new(self.grid.clone(), v).expect("finite by construction")
    }

    pub(crate) fn check_grid(&self, f: &Field) -> Result<(), ModelError> {
        if Arc::ptr_eq(f.grid(), &self.grid) || **f.grid() == *self.grid {
            Ok(())
        } else {
            Err(ModelError::GridMismatch)
        }
    }
}

/// Energy split into its two terms, plus the total with the regularized
/// gradient term `(1/p)∫(ε_reg + |∇u|²)^(p/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub phase: f64,
    pub total: f64,
    pub regularized_total: f64,
}

pub fn gamma_eps(s: f64, spec: &ProblemSpec) -> f64 {
    spec.gamma_eps(s)
}

pub fn beta_eps(s: f64, spec: &ProblemSpec) -> f64 {
    spec.beta_eps(s)
}

pub fn energy(u: &Field, spec: &ProblemSpec) -> Result<EnergyBreakdown, ModelError> {
    spec.check_grid(u)?;
    Ok(discrete::energy_breakdown(u.values(), spec))
}

/// `I[v] = J(u0 + v) - J(u0)` (regularized totals) for a perturbation `v`
/// vanishing on the boundary.
pub fn shifted_energy(v: &Field, u0: &Field, spec: &ProblemSpec) -> Result<f64, ModelError> {
    spec.check_grid(v)?;
    spec.check_grid(u0)?;
    for &node in spec.grid().boundary() {
        let value = v.values()[node];
        if value != 0.0 {
            return Err(ModelError::BoundaryNotZero { node, value });
        }
    }
    let u = u0.axpy(1.0, v);
    Ok(discrete::regularized_total(u.values(), spec, true)
        - discrete::regularized_total(u0.values(), spec, true))
}

/// Discrete Euler–Lagrange residual `-Δ_p u + Q β_ε(u)`: the gradient of the
/// (regularized) discrete energy divided by the node volume, zero on the boundary.
pub fn residual(u: &Field, spec: &ProblemSpec) -> Result<Field, ModelError> {
    spec.check_grid(u)?;
    Ok(residual_values(u, spec, true))
}

/// Residual of the gradient term alone, `-Δ_p u`.
pub fn dirichlet_residual(u: &Field, spec: &ProblemSpec) -> Result<Field, ModelError> {
    spec.check_grid(u)?;
    Ok(residual_values(u, spec, false))
}

fn residual_values(u: &Field, spec: &ProblemSpec, phase: bool) -> Field {
    let grid = spec.grid();
    let mut g = discrete::full_gradient(u.values(), spec, phase);
    let vol = grid.node_volume();
    for (k, r) in g.iter_mut().enumerate() {
        if grid.is_boundary(k) {
            *r = 0.0;
        } else {
            *r /= vol;
        }
    }
    Field::new(grid.clone(), g).expect("residual of a finite field is finite")
}

/// Sup-norm of the residual over interior nodes.
pub fn residual_sup(u: &Field, spec: &ProblemSpec) -> Result<f64, ModelError> {
    Ok(residual(u, spec)?.sup_norm())
}

/// Discrete `W^{1,p}_0` seminorm `(∫|∇v|^p)^{1/p}`.
pub fn gradient_seminorm(v: &Field, p: f64) -> f64 {
    let grid = v.grid();
    let cells: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            let g = grid.cell_gradient(v.values(), c);
            (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
        })
        .collect();
    grid.integrate_cells(&cells).expect("cell count").powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_spec(n: usize, p: f64, eps: f64, sigma: f64) -> ProblemSpec {
        ProblemSpec::new(Arc::new(Grid::line(1.0, n).unwrap()), p, eps, sigma).unwrap()
    }

    #[test]
    fn validation() {
        let g = Arc::new(Grid::line(1.0, 5).unwrap());
        assert_eq!(
            ProblemSpec::new(g.clone(), 1.0, 0.1, 1.0),
            Err(ModelError::Exponent(1.0))
        );
        assert!(matches!(ProblemSpec::new(g.clone(), 2.0, 0.0, 1.0), Err(ModelError::PhaseWidth(_))));
        assert!(matches!(ProblemSpec::new(g.clone(), 2.0, 0.1, 0.0), Err(ModelError::Datum(_))));
        let s = ProblemSpec::new(g.clone(), 2.0, 0.1, 1.0).unwrap();
        assert!(matches!(s.with_q(vec![1.0, 1.0, 0.0, 1.0, 1.0]), Err(ModelError::Weight(_))));
        assert!(matches!(
            ProblemSpec::new(g, 1.5, 0.1, 1.0).unwrap().with_eps_reg(0.0),
            Err(ModelError::Regularizer(_))
        ));
        assert_eq!(s.eps_reg(), 0.0);
    }

    #[test]
    fn gamma_and_beta_eps() {
        let s = line_spec(5, 2.0, 0.2, 1.0);
        assert_eq!(gamma_eps(-0.5, &s), 0.0);
        assert_eq!(gamma_eps(0.4, &s), 1.0);
        assert!((gamma_eps(0.1, &s) - 0.5).abs() < 1e-15);
        assert_eq!(beta_eps(-1.0, &s), 0.0);
        assert_eq!(beta_eps(0.4, &s), 0.0);
    }

    #[test]
    fn constant_energy() {
        let s = line_spec(21, 3.0, 0.01, 0.5);
        let u = Field::constant(s.grid().clone(), 0.5);
        let e = energy(&u, &s).unwrap();
        assert_eq!(e.dirichlet, 0.0);
        assert!((e.phase - 1.0).abs() < 1e-14);
        assert!((e.total - 1.0).abs() < 1e-14);
        let z = Field::zeros(s.grid().clone());
        assert_eq!(energy(&z, &s).unwrap().total, 0.0);
    }

    #[test]
    fn p2_residual_is_classical_stencil() {
        let n = 41;
        let s = line_spec(n, 2.0, 0.01, 0.5);
        let h = s.grid().spacing()[0];
        let u = Field::from_fn(s.grid().clone(), |x| 0.5 + 0.3 * (3.0 * x[0]).sin() + x[0] * x[0]).unwrap();
        // u >= eps everywhere, so the phase term vanishes identically
        let r = residual(&u, &s).unwrap();
        let v = u.values();
        for i in 1..n - 1 {
            let stencil = -(v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
            assert!((r.values()[i] - stencil).abs() < 1e-9 * (1.0 + stencil.abs()));
        }
        assert_eq!(r.values()[0], 0.0);
        assert_eq!(r.values()[n - 1], 0.0);
    }

    #[test]
    fn affine_is_discrete_p_harmonic_1d() {
        for p in [1.5, 2.0, 3.0] {
            let s = line_spec(31, p, 0.01, 0.5);
            let u = Field::from_fn(s.grid().clone(), |x| 0.5 + 0.7 * x[0]).unwrap();
            assert!(residual_sup(&u, &s).unwrap() < 1e-8, "p = {p}");
        }
    }

    #[test]
    fn shifted_energy_contract() {
        let s = line_spec(21, 2.0, 0.1, 0.3);
        let u0 = s.field_with_interior(0.3);
        let zero = Field::zeros(s.grid().clone());
        assert_eq!(shifted_energy(&zero, &u0, &s).unwrap(), 0.0);
        let bad = Field::constant(s.grid().clone(), 0.1);
        assert!(matches!(
            shifted_energy(&bad, &u0, &s),
            Err(ModelError::BoundaryNotZero { node: 0, .. })
        ));
        let v = Field::from_fn(s.grid().clone(), |x| -0.25 * (std::f64::consts::PI * x[0]).sin())
            .unwrap()
            .map(|v| if v.abs() < 1e-15 { 0.0 } else { v })
            .unwrap();
        let direct = energy(&u0.axpy(1.0, &v), &s).unwrap().regularized_total
            - energy(&u0, &s).unwrap().regularized_total;
        assert!((shifted_energy(&v, &u0, &s).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn seminorm_of_ramp() {
        let g = Arc::new(Grid::line(1.0, 11).unwrap());
        let v = Field::from_fn(g, |x| 2.0 * x[0]).unwrap();
        assert!((gradient_seminorm(&v, 3.0) - 2.0).abs() < 1e-12);
    }
}
