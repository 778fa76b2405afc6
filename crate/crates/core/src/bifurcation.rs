//! Sweeps of a constant boundary datum σ: where the minimizer leaves the
//! trivial solution, plus sampled checks of the energy-gap bound and of the
//! ridge around the trivial solution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::smooth_random_field;
use crate::grid::{Field, GridError};
use crate::model::{self, ModelError, ProblemSpec};
use crate::stationary::{
    default_seeds, multistart_minimize, three_solutions, trivial_solution, wedge_initializer, Classification,
    SolverParams, StationaryError,
};

#[derive(Debug, Error)]
pub enum BifurcationError {
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("sigma values must be positive, finite and increasing")]
    SigmaValues,
    #[error("premise must hold at sigma_min and fail at sigma_max (got {lo} at {sigma_min}, {hi} at {sigma_max}); widen the bracket")]
    Bracket {
        sigma_min: f64,
        sigma_max: f64,
        lo: bool,
        hi: bool,
    },
    #[error("premise flag is not monotone in sigma: {probes:?}")]
    NonMonotone { probes: Vec<(f64, bool)> },
    #[error("{name} must be positive, got {value}")]
    Param { name: &'static str, value: f64 },
}

/// Energies of the trivial solution and the best minimizer at one σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiseProbe {
    pub sigma: f64,
    pub j_u0: f64,
    pub j_u2: f64,
    /// `J(u₂) < J(u₀) - margin`.
    pub premise: bool,
}

/// Margin on the premise flag that keeps it from chattering at round-off.
pub fn energy_margin(params: &SolverParams) -> f64 {
    10.0 * params.tol
}

pub fn premise_at(spec: &ProblemSpec, sigma: f64, params: &SolverParams) -> Result<PremiseProbe, BifurcationError> {
    let spec = spec.with_sigma(sigma)?;
    let u0 = trivial_solution(&spec, params.tol, params.max_iter)?;
    let seeds = default_seeds(&spec, &u0.field);
    let ms = multistart_minimize(&spec, &seeds, params.tol, params.max_iter, params.method)?;
    let j_u0 = u0.energy.regularized_total;
    let j_u2 = ms
        .reports
        .first()
        .map_or(j_u0, |r| r.energy.regularized_total.min(j_u0));
    Ok(PremiseProbe {
        sigma,
        j_u0,
        j_u2,
        premise: j_u2 < j_u0 - energy_margin(params),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub j_u0: Option<f64>,
    pub j_u2: Option<f64>,
    pub j_u1: Option<f64>,
    /// Dead-core volume of u₂.
    pub deadcore_volume: f64,
    /// Distinct steady states found: u₀, nontrivial minimizers, and the saddle.
    pub count: usize,
    pub premise: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub p: f64,
    pub eps: f64,
    pub eps_reg: f64,
    pub dimension: usize,
    pub extent: Vec<f64>,
    pub nodes: Vec<usize>,
    pub profile: String,
    pub q_min: f64,
    pub q_max: f64,
    pub seed: u64,
}

impl SweepMeta {
    pub fn new(spec: &ProblemSpec, seed: u64) -> Self {
        let g = spec.grid();
        let dim = g.dimension();
        let q = spec.q();
        SweepMeta {
            p: spec.p(),
            eps: spec.eps(),
            eps_reg: spec.eps_reg(),
            dimension: dim,
            extent: g.extent()[..dim].to_vec(),
            nodes: g.nodes_per_axis()[..dim].to_vec(),
            profile: spec.profile().id().to_string(),
            q_min: q.iter().copied().fold(f64::INFINITY, f64::min),
            q_max: q.iter().copied().fold(0.0, f64::max),
            seed,
        }
    }

    /// The `# key=value,...` header line of the CSV exports.
    pub fn header(&self) -> String {
        let grid = self
            .nodes
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let ext = self
            .extent
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("x");
        format!(
            "# p={},eps={},eps_reg={},grid={},extent={},profile={},q={}..{},seed={}",
            self.p, self.eps, self.eps_reg, grid, ext, self.profile, self.q_min, self.q_max, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub meta: SweepMeta,
}

impl SweepResult {
    /// Flags must read true…true, false…false along increasing σ.
    pub fn check_monotone(&self) -> Result<(), BifurcationError> {
        let probes: Vec<(f64, bool)> = self.rows.iter().map(|r| (r.sigma, r.premise)).collect();
        check_pattern(probes)
    }
}

fn check_pattern(mut probes: Vec<(f64, bool)>) -> Result<(), BifurcationError> {
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let flips = probes.windows(2).filter(|w| w[0].1 != w[1].1).count();
    let starts_true = probes.first().is_none_or(|p| p.1);
    if flips > 1 || (flips == 1 && !starts_true) {
        return Err(BifurcationError::NonMonotone { probes });
    }
    Ok(())
}

fn check_sigmas(sigmas: &[f64]) -> Result<(), BifurcationError> {
    let ok = sigmas.iter().all(|s| s.is_finite() && *s > 0.0) && sigmas.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(BifurcationError::SigmaValues)
    }
}

fn sweep_row(spec: &ProblemSpec, sigma: f64, params: &SolverParams) -> SweepRow {
    let mut row = SweepRow {
        sigma,
        j_u0: None,
        j_u2: None,
        j_u1: None,
        deadcore_volume: 0.0,
        count: 0,
        premise: false,
        failure: None,
    };
    let spec = match spec.with_sigma(sigma) {
        Ok(s) => s,
        Err(e) => {
            row.failure = Some(e.to_string());
            return row;
        }
    };
    let sol = match three_solutions(&spec, params) {
        Ok(s) => s,
        Err(e) => {
            row.failure = Some(e.to_string());
            return row;
        }
    };
    row.j_u0 = Some(sol.u0.energy.total);
    row.j_u2 = Some(sol.u2.energy.total);
    row.deadcore_volume = sol.u2.dead_core_volume();
    row.premise = sol.premise;
    let minimizers = sol
        .minimizers
        .iter()
        .filter(|m| m.classification == Classification::Minimizer)
        .count();
    row.count = 1 + minimizers;
    match sol.saddle {
        Some(Ok((u1, _))) => {
            row.j_u1 = Some(u1.energy.total);
            row.count += 1;
        }
        Some(Err(e)) => row.failure = Some(e),
        None => {}
    }
    row
}

/// One row per σ; a failed row records its error and the sweep continues.
pub fn sigma_sweep(
    spec: &ProblemSpec,
    sigmas: &[f64],
    params: &SolverParams,
    seed: u64,
) -> Result<SweepResult, BifurcationError> {
    check_sigmas(sigmas)?;
    let rows: Vec<SweepRow> = sigmas.par_iter().map(|&s| sweep_row(spec, s, params)).collect();
    Ok(SweepResult {
        rows,
        meta: SweepMeta::new(spec, seed),
    })
}

/// Premise flags only, for dense scans.
pub fn premise_scan(spec: &ProblemSpec, sigmas: &[f64], params: &SolverParams) -> Result<Vec<PremiseProbe>, BifurcationError> {
    check_sigmas(sigmas)?;
    sigmas.par_iter().map(|&s| premise_at(spec, s, params)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalBracket {
    /// Premise holds (nontrivial minimizer).
    pub sigma_lo: f64,
    /// Premise fails (trivial minimizer).
    pub sigma_hi: f64,
    pub width: f64,
    pub iterations: usize,
    pub probes: Vec<PremiseProbe>,
}

/// Points of the coarse scan that precedes bisection.
const PRESCAN: usize = 8;

/// Brackets the σ where the premise flag switches off, to width `tol_sigma`.
pub fn find_critical_sigma(
    spec: &ProblemSpec,
    sigma_min: f64,
    sigma_max: f64,
    tol_sigma: f64,
    params: &SolverParams,
) -> Result<CriticalBracket, BifurcationError> {
    check_sigmas(&[sigma_min, sigma_max])?;
    if !(tol_sigma > 0.0) {
        return Err(BifurcationError::Param {
            name: "tol_sigma",
            value: tol_sigma,
        });
    }
    let ends = premise_scan(spec, &[sigma_min, sigma_max], params)?;
    if !ends[0].premise || ends[1].premise {
        return Err(BifurcationError::Bracket {
            sigma_min,
            sigma_max,
            lo: ends[0].premise,
            hi: ends[1].premise,
        });
    }
    let mut probes = ends;
    let (mut lo, mut hi) = (sigma_min, sigma_max);
    let mut iterations = 0;
    if hi - lo > tol_sigma {
        let inner: Vec<f64> = (1..PRESCAN)
            .map(|k| sigma_min + (sigma_max - sigma_min) * k as f64 / PRESCAN as f64)
            .collect();
        probes.extend(premise_scan(spec, &inner, params)?);
        check_pattern(probes.iter().map(|p| (p.sigma, p.premise)).collect())?;
        for p in &probes {
            if p.premise {
                lo = lo.max(p.sigma);
            } else {
                hi = hi.min(p.sigma);
            }
        }
    }
    while hi - lo > tol_sigma {
        let mid = 0.5 * (lo + hi);
        let probe = premise_at(spec, mid, params)?;
        probes.push(probe);
        if probe.premise {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    probes.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    Ok(CriticalBracket {
        sigma_lo: lo,
        sigma_hi: hi,
        width: hi - lo,
        iterations,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyGapReport {
    pub delta: f64,
    /// `J(wedge) - J(u₀)`.
    pub lhs: f64,
    /// `C σ_M^p δ^{1-p} - ∫_{Ω_δ} Q`.
    pub bound: f64,
    pub constant: f64,
    pub collar_volume: f64,
    pub inner_q: f64,
    pub satisfied: bool,
    /// False when the bound is non-negative, so it cannot show `lhs < 0`.
    pub informative: bool,
    pub wedge_energy: f64,
    pub u0_energy: f64,
}

/// Compares the energy of the collar wedge with the trivial solution. The
/// constant is the 1D ramp value `(1/p)|collar|/δ`, where `|collar|` is the
/// volume of cells not pinned at zero.
pub fn energy_gap_check(spec: &ProblemSpec, delta: f64) -> Result<(EnergyGapReport, Field, Field), BifurcationError> {
    let wedge = wedge_initializer(spec, delta)?;
    let u0 = trivial_solution(spec, 1e-11, 200)?;
    let grid = spec.grid();
    let nc = grid.corners();
    let cvol = grid.cell_volume();
    let h_min = grid.spacing()[..grid.dimension()].iter().copied().fold(f64::INFINITY, f64::min);
    let mut inner_q = 0.0;
    let mut inner_vol = 0.0;
    for nodes in grid.cells() {
        if nodes[..nc]
            .iter()
            .all(|&n| grid.distance_to_boundary(n) >= delta - 1e-9 * h_min)
        {
            let q: f64 = nodes[..nc].iter().map(|&n| spec.q()[n]).sum::<f64>() / nc as f64;
            inner_q += q * cvol;
            inner_vol += cvol;
        }
    }
    let collar_volume = grid.volume() - inner_vol;
    let p = spec.p();
    let constant = collar_volume / (p * delta);
    let bound = constant * spec.sigma_max().powf(p) * delta.powf(1.0 - p) - inner_q;
    let wedge_energy = model::energy(&wedge, spec)?.total;
    let u0_energy = u0.energy.total;
    let lhs = wedge_energy - u0_energy;
    let report = EnergyGapReport {
        delta,
        lhs,
        bound,
        constant,
        collar_volume,
        inner_q,
        satisfied: lhs <= bound,
        informative: bound < 0.0,
        wedge_energy,
        u0_energy,
    };
    Ok((report, wedge, u0.field))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeProbe {
    pub delta_norm: f64,
    pub min_energy: f64,
    pub argmin: usize,
    /// Shifted energy per sample id.
    pub energies: Vec<f64>,
    /// Samples redrawn because their gradient vanished.
    pub resampled: usize,
}

/// Sample `id` draws from its own ChaCha stream of `seed`, so a larger
/// `sample_count` only appends samples.
fn ridge_sample(spec: &ProblemSpec, seed: u64, id: usize) -> Result<(Field, usize), GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let mut redraws = 0;
    loop {
        let v = smooth_random_field(spec, 8, &mut rng)?;
        if model::gradient_seminorm(&v, spec.p()) > 0.0 {
            return Ok((v, redraws));
        }
        redraws += 1;
    }
}

/// Minimum of `I[v] = J(u₀ + v) - J(u₀)` over random boundary-vanishing `v`
/// with `(∫|∇v|^p)^{1/p} = δ`. When `v2` is given its direction is sample 0.
pub fn mountain_ridge_probe(
    spec: &ProblemSpec,
    u0: &Field,
    v2: Option<&Field>,
    delta_norm: f64,
    sample_count: usize,
    seed: u64,
) -> Result<RidgeProbe, BifurcationError> {
    if !(delta_norm.is_finite() && delta_norm > 0.0) {
        return Err(BifurcationError::Param {
            name: "delta_norm",
            value: delta_norm,
        });
    }
    if sample_count == 0 {
        return Err(BifurcationError::Param {
            name: "sample_count",
            value: 0.0,
        });
    }
    let p = spec.p();
    let scaled = |v: &Field| -> Result<f64, BifurcationError> {
        let s = delta_norm / model::gradient_seminorm(v, p);
        let w = v.map(|x| x * s)?;
        Ok(model::shifted_energy(&w, u0, spec)?)
    };
    let results: Vec<Result<(f64, usize), BifurcationError>> = (0..sample_count)
        .into_par_iter()
        .map(|id| match (id, v2) {
            (0, Some(v)) if model::gradient_seminorm(v, p) > 0.0 => Ok((scaled(v)?, 0)),
            _ => {
                let (v, redraws) = ridge_sample(spec, seed, id)?;
                Ok((scaled(&v)?, redraws))
            }
        })
        .collect();
    let mut energies = Vec::with_capacity(sample_count);
    let mut resampled = 0;
    for r in results {
        let (e, k) = r?;
        energies.push(e);
        resampled += k;
    }
    let argmin = (0..energies.len())
        .min_by(|&a, &b| energies[a].total_cmp(&energies[b]))
        .expect("at least one sample");
    Ok(RidgeProbe {
        delta_norm,
        min_energy: energies[argmin],
        argmin,
        energies,
        resampled,
    })
}
