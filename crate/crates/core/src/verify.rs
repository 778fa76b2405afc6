//! Randomized checks shared by the `verify` command and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolution::{
    comparison_check_with_reaction, smooth_random_field, ComparisonReport, EvolutionError, FlowParams, PhaseReaction,
};
use crate::grid::Field;
use crate::model::inequality::{inequality_oracle, segment_double_integral};
use crate::model::ProblemSpec;

/// Residuals below this count as violations.
pub const INEQUALITY_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySuite {
    pub p: f64,
    pub dimension: usize,
    pub samples: usize,
    pub min_residual: f64,
    pub violations: usize,
    /// Smallest best constant of the superquadratic convexity inequality.
    pub min_convex_constant: Option<f64>,
    pub passed: bool,
}

/// One random pair: entries uniform in `[-s, s]` with `s` log-uniform in
/// `[1e-3, 1e1]`; every fourth pair puts `b` close to `a`.
fn random_pair(rng: &mut impl Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
    let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
    let b: Vec<f64> = if rng.gen_range(0..4) == 0 {
        let d = scale * 10f64.powf(rng.gen_range(-6.0..-1.0));
        a.iter().map(|x| x + rng.gen_range(-d..d)).collect()
    } else {
        (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
    };
    (a, b)
}

/// The elementary p-Laplacian inequalities over `samples` random pairs.
/// Chunks of pairs draw from separate streams of `seed`, so the result does
/// not depend on the thread count.
pub fn inequality_suite(p: f64, dimension: usize, samples: usize, seed: u64) -> InequalitySuite {
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let stream_base = ((p * 1000.0).round() as u64) << 20 | (dimension as u64) << 12;
    let parts: Vec<(f64, usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut min_res = f64::INFINITY;
            let mut bad = 0;
            let mut min_c = f64::INFINITY;
            for _ in 0..n {
                let (a, b) = random_pair(&mut rng, dimension);
                let r = inequality_oracle(&a, &b, p).expect("valid exponent and lengths");
                let m = r.min_residual();
                min_res = min_res.min(m);
                if m < INEQUALITY_FLOOR {
                    bad += 1;
                }
                if let Some(c) = r.best_convex_constant {
                    min_c = min_c.min(c);
                }
            }
            (min_res, bad, min_c)
        })
        .collect();
    let min_residual = parts.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let violations = parts.iter().map(|x| x.1).sum();
    let min_c = parts.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    InequalitySuite {
        p,
        dimension,
        samples,
        min_residual,
        violations,
        min_convex_constant: min_c.is_finite().then_some(min_c),
        passed: violations == 0,
    }
}

/// Largest deviation of the nested quadrature from its `p = 2` value 1/2,
/// over random pairs.
pub fn quadrature_check(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let (a, b) = random_pair(&mut rng, 1 + k % 4);
        worst = worst.max((segment_double_integral(&a, &b, 2.0) - 0.5).abs());
    }
    worst
}

/// An ordered pair of initial states carrying the boundary datum: a smooth
/// random field and the same field raised by a non-negative bump.
pub fn random_ordered_pair(spec: &ProblemSpec, rng: &mut impl Rng) -> Result<(Field, Field), EvolutionError> {
    let r1 = smooth_random_field(spec, 8, rng)?;
    let r2 = smooth_random_field(spec, 8, rng)?;
    let base: f64 = rng.gen_range(0.0..0.3);
    let amp: f64 = rng.gen_range(0.0..0.1);
    let gap: f64 = rng.gen_range(0.0..0.2);
    let mut lo: Vec<f64> = r1.values().iter().map(|r| base + amp * r).collect();
    spec.impose_boundary(&mut lo);
    let hi: Vec<f64> = lo.iter().zip(r2.values()).map(|(l, r)| l + gap * r * r).collect();
    Ok((Field::new(spec.grid().clone(), lo)?, Field::new(spec.grid().clone(), hi)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTrials {
    pub p: f64,
    pub trials: usize,
    pub dt: f64,
    pub max_violation: f64,
    pub failures: usize,
    pub reports: Vec<ComparisonReport>,
}

/// `trials` random ordered pairs evolved side by side; trial `k` draws from
/// stream `k` of `seed`. The pairs evolve under the lumped nodal reaction,
/// which keeps the order for `dt K < 1` on any mesh; the energy flow averages
/// the reaction over cells and keeps it only on meshes fine against ε.
pub fn comparison_trials(
    spec: &ProblemSpec,
    params: &FlowParams,
    trials: usize,
    seed: u64,
) -> Result<ComparisonTrials, EvolutionError> {
    let reports: Vec<ComparisonReport> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (lo, hi) = random_ordered_pair(spec, &mut rng)?;
            comparison_check_with_reaction(&lo, &hi, spec, params, &PhaseReaction { spec })
        })
        .collect::<Result<_, _>>()?;
    Ok(ComparisonTrials {
        p: spec.p(),
        trials,
        dt: params.dt,
        max_violation: reports.iter().map(|r| r.max_violation).fold(0.0, f64::max),
        failures: reports.iter().filter(|r| !r.passed).count(),
        reports,
    })
}
