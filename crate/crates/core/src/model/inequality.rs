//! Residuals of the elementary vector inequalities behind the p-Laplacian's
//! monotonicity and convexity estimates.
//!
//! For vectors `a`, `b` and exponent `p`:
//!
//! * monotone, `1 < p <= 2`:
//!   `<|b|^{p-2}b - |a|^{p-2}a, b-a> >= (p-1)|b-a|²(1+|a|²+|b|²)^{(p-2)/2}`
//! * monotone, `p >= 2`: `<|b|^{p-2}b - |a|^{p-2}a, b-a> >= 2^{2-p}|b-a|^p`
//! * convex, `p >= 2`: `|b|^p >= |a|^p + p<|a|^{p-2}a, b-a> + C|b-a|^p`
//! * convex, `1 < p <= 2`:
//!   `|b|^p >= |a|^p + p<|a|^{p-2}a, b-a> + p(p-1)|b-a|² ∫₀¹∫₀ᵗ|(1-s)a+sb|^{p-2} ds dt`
//!
//! Each residual is `LHS - RHS`, so the inequality holds iff it is `>= 0`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// `LHS - RHS` of every inequality that applies at this `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub p: f64,
    pub monotone_subquadratic: Option<f64>,
    pub monotone_superquadratic: Option<f64>,
    pub convex_superquadratic: Option<f64>,
    pub convex_subquadratic: Option<f64>,
    /// `(|b|^p - |a|^p - p<|a|^{p-2}a, b-a>) / |b-a|^p`: the largest constant
    /// the superquadratic convexity inequality admits for this pair. Omitted
    /// when `|b-a|` is below `1e-3 max(|a|, |b|)`.
    pub best_convex_constant: Option<f64>,
}

impl InequalityReport {
    pub fn residuals(&self) -> impl Iterator<Item = f64> + '_ {
        [
            self.monotone_subquadratic,
            self.monotone_superquadratic,
            self.convex_superquadratic,
            self.convex_subquadratic,
        ]
        .into_iter()
        .flatten()
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals().fold(f64::INFINITY, f64::min)
    }
}

/// Conservative constant for the superquadratic convexity inequality,
/// `2^{2-p} / (p 2^p)`.
pub fn convex_constant(p: f64) -> f64 {
    2f64.powf(2.0 - p) / (p * 2f64.powf(p))
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|a|^{p-2} a`, zero at `a = 0`.
fn flux(a: &[f64], p: f64) -> Vec<f64> {
    let n = norm(a);
    if n == 0.0 {
        return vec![0.0; a.len()];
    }
    let c = n.powf(p - 2.0);
    a.iter().map(|v| c * v).collect()
}

pub fn inequality_oracle(a: &[f64], b: &[f64], p: f64) -> Result<InequalityReport, ModelError> {
    if !(p.is_finite() && p > 1.0) {
        return Err(ModelError::Exponent(p));
    }
    if a.len() != b.len() {
        return Err(ModelError::Length {
            what: "vector b",
            expected: a.len(),
            got: b.len(),
        });
    }
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let nd = norm(&d);
    let (na, nb) = (norm(a), norm(b));
    let fa = flux(a, p);
    let fb = flux(b, p);
    let mono: f64 = fb.iter().zip(&fa).zip(&d).map(|((x, y), z)| (x - y) * z).sum();
    let taylor = nb.powf(p) - na.powf(p) - p * dot(&fa, &d);

    let mut r = InequalityReport {
        p,
        monotone_subquadratic: None,
        monotone_superquadratic: None,
        convex_superquadratic: None,
        convex_subquadratic: None,
        best_convex_constant: None,
    };
    if p <= 2.0 {
        let rhs = (p - 1.0) * nd * nd * (1.0 + na * na + nb * nb).powf(0.5 * (p - 2.0));
        r.monotone_subquadratic = Some(mono - rhs);
        let rhs = if nd == 0.0 {
            0.0
        } else {
            p * (p - 1.0) * nd * nd * segment_double_integral(a, b, p)
        };
        r.convex_subquadratic = Some(taylor - rhs);
    }
    if p >= 2.0 {
        r.monotone_superquadratic = Some(mono - 2f64.powf(2.0 - p) * nd.powf(p));
        r.convex_superquadratic = Some(taylor - convex_constant(p) * nd.powf(p));
        // Near-identical pairs leave only rounding noise in the ratio.
        if nd > 1e-3 * na.max(nb) {
            r.best_convex_constant = Some(taylor / nd.powf(p));
        }
    }
    Ok(r)
}

const GAUSS_POINTS: usize = 48;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_POINTS;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// `∫_lo^hi f(δ) dδ` for `f` with an integrable algebraic singularity (or a
/// near-singular peak) at `δ = 0`: split at zero and substitute `δ = ±τ^m`
/// on each side so the integrand becomes smooth in `τ`.
fn singular_integral(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, m: i32) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (xs, ws) = gauss_legendre();
    let len = hi - lo;
    if lo - len > 0.0 || hi + len < 0.0 {
        // singularity far from the interval: the integrand is smooth
        let half = 0.5 * len;
        let mid = 0.5 * (hi + lo);
        return xs.iter().zip(ws).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half;
    }
    let mf = m as f64;
    let side = |t0: f64, t1: f64, sign: f64| -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t1 + t0);
        xs.iter()
            .zip(ws)
            .map(|(x, w)| {
                let tau = mid + half * x;
                w * f(sign * tau.powi(m)) * mf * tau.powi(m - 1)
            })
            .sum::<f64>()
            * half
    };
    let root = |d: f64| d.max(0.0).powf(1.0 / mf);
    let mut total = 0.0;
    if hi > 0.0 {
        total += side(root(lo), root(hi), 1.0);
    }
    if lo < 0.0 {
        total += side(root(-hi), root(-lo), -1.0);
    }
    total
}

/// `∫₀¹∫₀ᵗ |(1-s)a + sb|^{p-2} ds dt` by nested quadrature.
pub fn segment_double_integral(a: &[f64], b: &[f64], p: f64) -> f64 {
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let dd = dot(&d, &d);
    if dd == 0.0 {
        let na2 = dot(a, a);
        return if na2 == 0.0 { 0.0 } else { 0.5 * na2.powf(0.5 * (p - 2.0)) };
    }
    // closest approach of the segment's line to the origin, at s = anchor;
    // both integrals run in the offset δ = s - anchor
    let anchor = -dot(a, &d) / dd;
    let rmin2: f64 = a.iter().zip(&d).map(|(x, y)| (x + anchor * y).powi(2)).sum();
    let f = move |off: f64| {
        let r2 = rmin2 + dd * off * off;
        if r2 == 0.0 {
            0.0
        } else {
            r2.powf(0.5 * (p - 2.0))
        }
    };
    let m = ((6.0 / (p - 1.0)).ceil() as i32).clamp(2, 24);
    let inner = |t_off: f64| singular_integral(&f, -anchor, t_off, m);
    singular_integral(&inner, -anchor, 1.0 - anchor, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form in 1D: ∫₀¹ (1-s)|a + s d|^{q} ds, q = p-2, via the
    /// antiderivatives of |x|^q and x|x|^q.
    fn exact_1d(a: f64, b: f64, p: f64) -> f64 {
        let d = b - a;
        let q = p - 2.0;
        // ∫₀¹ (1-s)|a+sd|^q ds with x = a + s d, s = (x-a)/d, 1-s = (b-x)/d
        // = (1/d²) ∫_a^b (b - x)|x|^q dx  (sign-consistent for d < 0)
        let prim = |x: f64| {
            let ax = x.abs();
            if ax == 0.0 {
                return 0.0;
            }
            // ∫|x|^q dx = x|x|^q/(q+1); ∫ x|x|^q dx = |x|^{q+2}/(q+2)
            b * x * ax.powf(q) / (q + 1.0) - ax.powf(q + 2.0) / (q + 2.0)
        };
        (prim(b) - prim(a)) / (d * d)
    }

    #[test]
    fn double_integral_p2_is_half() {
        for (a, b) in [(vec![0.3, -1.0], vec![2.0, 0.1]), (vec![1.0], vec![-1.0])] {
            assert!((segment_double_integral(&a, &b, 2.0) - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn double_integral_matches_1d_closed_form() {
        for p in [1.2, 1.3, 1.5, 1.8, 2.5, 3.0] {
            for (a, b) in [(0.7, -0.4), (-1.0, 0.5), (0.2, 0.9), (-0.3, -0.8), (0.0, 1.0), (1e-7, -1.0)] {
                let q = segment_double_integral(&[a], &[b], p);
                let e = exact_1d(a, b, p);
                assert!((q - e).abs() <= 1e-12 * e.abs().max(1.0), "p={p} a={a} b={b}: {q} vs {e}");
            }
        }
    }

    #[test]
    fn equal_vectors_give_zero() {
        for p in [1.3, 2.0, 3.0] {
            let r = inequality_oracle(&[0.4, -0.2], &[0.4, -0.2], p).unwrap();
            assert!(r.residuals().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn zero_base_superquadratic() {
        // a = 0: |b|^p >= 2^{2-p}|b|^p
        let b = [0.6, -0.3, 0.2];
        let r = inequality_oracle(&[0.0; 3], &b, 3.5).unwrap();
        assert!(r.monotone_superquadratic.unwrap() >= 0.0);
    }

    #[test]
    fn p2_convex_is_identity() {
        let r = inequality_oracle(&[0.3, 1.1], &[-0.7, 0.25], 2.0).unwrap();
        assert!(r.convex_subquadratic.unwrap().abs() < 1e-12);
        assert!(r.monotone_subquadratic.unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(inequality_oracle(&[1.0], &[2.0], 1.0).is_err());
        assert!(inequality_oracle(&[1.0], &[2.0, 1.0], 2.0).is_err());
    }
}
