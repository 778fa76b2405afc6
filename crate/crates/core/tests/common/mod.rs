//! Independent 1D shooting integration of the discrete Euler–Lagrange
//! recurrence, shared by the oracle and acceptance targets.

use pblap_core::linalg::BandMatrix;
use pblap_core::ProblemSpec;

fn flux(g: f64, p: f64, eps_reg: f64) -> f64 {
    (eps_reg + g * g).powf(0.5 * (p - 2.0)) * g
}

/// Marches the 1D recurrence
/// `flux(g_i) = flux(g_{i-1}) + h/2 (β(m_{i-1}) + β(m_i))`, `m_i = u_i + h g_i / 2`,
/// from value `u0` with first slope `g0`. Each new slope solves a scalar
/// equation by bracketed Newton iteration, taking the root nearest the
/// previous slope.
fn shoot(spec: &ProblemSpec, u0: f64, g0: f64, steps: usize) -> Vec<f64> {
    let h = spec.grid().spacing()[0];
    let mut u = vec![u0, u0 + h * g0];
    let mut g = g0;
    for i in 1..steps {
        let ui = u[i];
        let a = flux(g, spec.p(), spec.eps_reg()) + 0.5 * h * spec.beta_eps(0.5 * (u[i - 1] + ui));
        g = step_slope(spec, ui, a, g);
        u.push(ui + h * g);
    }
    u
}

/// Root of `flux(x) - h/2 β(u + h x / 2) = a` nearest `g`.
fn step_slope(spec: &ProblemSpec, ui: f64, a: f64, g: f64) -> f64 {
    let h = spec.grid().spacing()[0];
    let (p, er) = (spec.p(), spec.eps_reg());
    let phi = |x: f64| flux(x, p, er) - a - 0.5 * h * spec.beta_eps(ui + 0.5 * h * x);
    let dphi = |x: f64| {
        let s = er + x * x;
        let df = s.powf(0.5 * (p - 2.0)) + (p - 2.0) * x * x * s.powf(0.5 * (p - 4.0));
        df - 0.25 * h * h * spec.beta_eps_prime(ui + 0.5 * h * x)
    };
    // for p < 2 the equation has spurious steep roots while the midpoint
    // sits in the layer; walk out from the previous slope towards the
    // first sign change
    let f0 = phi(g);
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let mut w = 1e-6 * (1.0 + g.abs());
    let (mut near, mut far) = (g, g + dir * w);
    while phi(far) * dir < 0.0 {
        near = far;
        w *= 1.5;
        far = g + dir * w;
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let f = phi(x);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dphi(x);
        let newton = x - f / d;
        if d > 0.0 && newton > lo && newton < hi {
            x = newton;
            if (f / d).abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        } else {
            x = 0.5 * (lo + hi);
        }
        if hi - lo <= 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

const SEGMENT: usize = 10;

/// Mismatches of a multiple-shooting guess. Segment `k` starts at node
/// `SEGMENT k` from the unknown value and slope there (the first value is
/// the boundary datum); adjacent segments must agree in value and slope, and
/// the last one must be symmetric about the centre node.
fn shooting_mismatch(spec: &ProblemSpec, x: &[f64], mid: usize) -> Vec<f64> {
    let h = spec.grid().spacing()[0];
    let segments = mid.div_ceil(SEGMENT);
    let start = |k: usize| if k == 0 { (spec.sigma()[0], x[0]) } else { (x[2 * k - 1], x[2 * k]) };
    let mut out = Vec::with_capacity(x.len());
    for k in 0..segments {
        let (u0, g0) = start(k);
        let len = SEGMENT.min(mid - SEGMENT * k);
        let u = shoot(spec, u0, g0, len + 1);
        if k + 1 < segments {
            let (u1, g1) = start(k + 1);
            out.push(u[len] - u1);
            out.push((u[len + 1] - u[len]) / h - g1);
        } else {
            out.push((u[len + 1] - u[len - 1]) / h);
        }
    }
    out
}

/// Symmetric solutions on the unit interval with an odd node count, by
/// multiple shooting on the discrete recurrence. When the centre sits inside
/// the transition layer the recurrence has a fast growing mode, so short
/// segments matched by Newton (finite-difference Jacobian) replace a single
/// shot across the half interval; `guess` only seeds the unknowns.
pub fn shooting_oracle(spec: &ProblemSpec, guess: &[f64]) -> Vec<f64> {
    let n = spec.grid().node_count();
    let mid = n / 2;
    let h = spec.grid().spacing()[0];
    let segments = mid.div_ceil(SEGMENT);
    let mut x = vec![(guess[1] - guess[0]) / h];
    for k in 1..segments {
        let i = SEGMENT * k;
        x.push(guess[i]);
        x.push((guess[i + 1] - guess[i]) / h);
    }
    let m = x.len();
    for _ in 0..50 {
        let f = shooting_mismatch(spec, &x, mid);
        if f.iter().all(|v| v.abs() < 1e-13) {
            break;
        }
        let mut jac = BandMatrix::zeros(m, m - 1, m - 1);
        for j in 0..m {
            let step = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += step;
            let mut xm = x.clone();
            xm[j] -= step;
            let (fp, fm) = (shooting_mismatch(spec, &xp, mid), shooting_mismatch(spec, &xm, mid));
            for i in 0..m {
                jac.add(i, j, (fp[i] - fm[i]) / (2.0 * step));
            }
        }
        let dx = jac.lu_solve(&f).expect("nonsingular shooting jacobian");
        // backtrack on the mismatch norm
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        let f0 = norm(&f);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - t * d).collect();
            if norm(&shooting_mismatch(spec, &trial, mid)) < f0 || t < 1e-6 {
                x = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let f = shooting_mismatch(spec, &x, mid);
    assert!(f.iter().all(|v| v.abs() < 1e-10), "p={}: multiple shooting did not converge: {f:?}", spec.p());
    let mut half = Vec::with_capacity(mid + 1);
    for k in 0..segments {
        let (u0, g0) = if k == 0 { (spec.sigma()[0], x[0]) } else { (x[2 * k - 1], x[2 * k]) };
        let len = SEGMENT.min(mid - SEGMENT * k);
        half.extend_from_slice(&shoot(spec, u0, g0, len)[..len]);
    }
    half.push(shoot(spec, x[m - 2], x[m - 1], SEGMENT.min(mid - SEGMENT * (segments - 1)) + 1)[mid - SEGMENT * (segments - 1)]);
    let mut full = half.clone();
    full.extend(half.iter().rev().skip(1));
    full
}
