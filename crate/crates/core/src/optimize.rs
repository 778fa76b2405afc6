//! Descent and Newton iterations on a [`Functional`].
//!
//! All stopping tests use the residual sup-norm, i.e. the gradient divided by
//! the node volume, so tolerances mean the same thing on every grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm2, sup_norm, LinalgError};
use crate::model::Functional;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("line search found no decrease (residual {residual:e}, slope {slope:e})")]
    LineSearch { residual: f64, slope: f64 },
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DescentMethod {
    /// Steepest descent with backtracking.
    Gradient,
    /// Polak–Ribière nonlinear conjugate gradients with restarts.
    ConjugateGradient,
    /// Newton direction from the Hessian shifted until positive definite.
    #[default]
    Newton,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Objective value of every accepted iterate, starting with the initial one.
    pub values: Vec<f64>,
    pub converged: bool,
    pub error: Option<OptimizeError>,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Relative size below which objective differences are round-off.
const VALUE_NOISE: f64 = 1e-13;

/// Minimizes `f` from `x0` until the residual sup-norm is at most `tol`.
pub fn minimize(
    f: &Functional<'_>,
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
    method: DescentMethod,
) -> Outcome {
    let mut x = x0;
    let mut value = f.value(&x);
    let mut values = vec![value];
    let mut grad = f.gradient(&x);
    let vol = f.spec().grid().node_volume();
    let mut prev_dir: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step_guess = 1.0;
    let mut shift = 0.0;
    for it in 0..=max_iter {
        let residual = sup_norm(&grad) / vol;
        if residual <= tol {
            return Outcome {
                x,
                residual,
                iterations: it,
                values,
                converged: true,
                error: None,
            };
        }
        if it == max_iter {
            return Outcome {
                x,
                residual,
                iterations: it,
                values,
                converged: false,
                error: Some(OptimizeError::MaxIterations {
                    iterations: it,
                    residual,
                }),
            };
        }
        let dir = match method {
            DescentMethod::Newton => match shifted_newton_direction(f, &x, &grad, &mut shift) {
                Ok(d) => d,
                Err(e) => {
                    return Outcome {
                        x,
                        residual,
                        iterations: it,
                        values,
                        converged: false,
                        error: Some(e.into()),
                    }
                }
            },
            DescentMethod::Gradient => grad.iter().map(|g| -g / vol).collect(),
            DescentMethod::ConjugateGradient => {
                let sd: Vec<f64> = grad.iter().map(|g| -g / vol).collect();
                match &prev_dir {
                    Some((pd, pg)) => {
                        let num: f64 = grad.iter().zip(pg).map(|(g, q)| g * (g - q)).sum();
                        let den = dot(pg, pg);
                        let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
                        let d: Vec<f64> = sd.iter().zip(pd).map(|(s, p)| s + beta * p).collect();
                        if dot(&d, &grad) < 0.0 {
                            d
                        } else {
                            sd
                        }
                    }
                    None => sd,
                }
            }
        };
        let slope = dot(&grad, &dir);
        let noise = VALUE_NOISE * (1.0 + value.abs());
        let mut alpha = if method == DescentMethod::Newton { 1.0 } else { step_guess };
        let mut accepted = None;
        if -slope > noise {
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                let tv = f.value(&trial);
                if tv.is_finite() && tv <= value + ARMIJO * alpha * slope {
                    accepted = Some((trial, tv, None));
                    break;
                }
                alpha *= 0.5;
                if -ARMIJO * alpha * slope < noise {
                    break;
                }
            }
        }
        if accepted.is_none() {
            // The predicted decrease is at round-off level, so the energy
            // cannot discriminate: backtrack on the residual instead, keeping
            // the energy within the noise band.
            alpha = if method == DescentMethod::Newton { 1.0 } else { step_guess };
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                let tv = f.value(&trial);
                if tv <= value + noise {
                    let tg = f.gradient(&trial);
                    if sup_norm(&tg) / vol < residual {
                        accepted = Some((trial, tv, Some(tg)));
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        let Some((nx, nv, ng)) = accepted else {
            if method == DescentMethod::ConjugateGradient && prev_dir.is_some() {
                // restart from steepest descent
                prev_dir = None;
                step_guess = 1.0;
                continue;
            }
            return fail_line_search(x, residual, slope, it, values);
        };
        if method != DescentMethod::Newton {
            step_guess = (alpha * 2.0).min(1e6);
        }
        let ng = ng.unwrap_or_else(|| f.gradient(&nx));
        prev_dir = Some((dir, grad));
        x = nx;
        value = nv;
        values.push(value);
        grad = ng;
    }
    unreachable!()
}

fn fail_line_search(x: Vec<f64>, residual: f64, slope: f64, it: usize, values: Vec<f64>) -> Outcome {
    Outcome {
        x,
        residual,
        iterations: it,
        values,
        converged: false,
        error: Some(OptimizeError::LineSearch { residual, slope }),
    }
}

/// Smallest residual resolvable at `x`: one rounding of every unknown moves
/// the residual by about `ulp(x) · |H| / vol`.
pub fn roundoff_floor(f: &Functional<'_>, x: &[f64]) -> f64 {
    let h = f.hessian(x);
    let hmax = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    8.0 * f64::EPSILON * (1.0 + sup_norm(x)) * hmax / f.spec().grid().node_volume()
}

/// Solves `(H + τI) d = -g` with the smallest `τ` from a geometric ladder
/// that makes the shifted Hessian positive definite. `shift` carries the last
/// successful `τ` between iterations.
fn shifted_newton_direction(
    f: &Functional<'_>,
    x: &[f64],
    grad: &[f64],
    shift: &mut f64,
) -> Result<Vec<f64>, LinalgError> {
    let h = f.hessian(x);
    let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
    let scale = h
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let floor = 1e-10 * scale;
    let mut tau = if *shift > 0.0 { (*shift * 0.1).max(floor) } else { 0.0 };
    if tau == 0.0 {
        if let Ok(d) = h.cholesky_solve(&rhs) {
            *shift = 0.0;
            return Ok(d);
        }
        tau = floor.max(1e-3 * scale * 1e-6);
    }
    for _ in 0..40 {
        let mut hs = h.clone();
        hs.add_diagonal(tau);
        if let Ok(d) = hs.cholesky_solve(&rhs) {
            *shift = tau;
            return Ok(d);
        }
        tau *= 10.0;
    }
    Err(LinalgError::NotPositiveDefinite {
        index: 0,
        value: tau,
    })
}

/// Newton's method on the gradient with the unmodified (possibly indefinite)
/// Hessian, damped by halving whenever the residual 2-norm grows. Converges to
/// the nearby critical point whatever its index.
pub fn newton_critical_point(f: &Functional<'_>, x0: Vec<f64>, tol: f64, max_iter: usize) -> Outcome {
    let vol = f.spec().grid().node_volume();
    let mut x = x0;
    let mut grad = f.gradient(&x);
    let mut values = vec![f.value(&x)];
    for it in 0..=max_iter {
        let residual = sup_norm(&grad) / vol;
        if residual <= tol {
            return Outcome {
                x,
                residual,
                iterations: it,
                values,
                converged: true,
                error: None,
            };
        }
        if it == max_iter {
            return Outcome {
                x,
                residual,
                iterations: it,
                values,
                converged: false,
                error: Some(OptimizeError::MaxIterations {
                    iterations: it,
                    residual,
                }),
            };
        }
        let h = f.hessian(&x);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let solved = h.lu_solve(&rhs).or_else(|e| {
            // degenerate rows (flat regions for p > 2): a tiny shift restores
            // solvability without changing the converged point
            let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut hs = h.clone();
            hs.add_diagonal(1e-10 * scale.max(1e-300));
            hs.lu_solve(&rhs).map_err(|_| e)
        });
        let dir = match solved {
            Ok(d) => d,
            Err(e) => {
                return Outcome {
                    x,
                    residual,
                    iterations: it,
                    values,
                    converged: false,
                    error: Some(e.into()),
                }
            }
        };
        let n0 = norm2(&grad);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            let tg = f.gradient(&trial);
            if norm2(&tg) < n0 {
                accepted = Some((trial, tg));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nx, ng)) => {
                x = nx;
                grad = ng;
                values.push(f.value(&x));
            }
            None => return fail_line_search(x, residual, dot(&grad, &dir), it, values),
        }
    }
    unreachable!()
}
