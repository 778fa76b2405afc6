//! Banded matrices with pivoted LU and Cholesky factorizations.
//!
//! The discrete energies couple each node only with its cell neighbours, so
//! Hessians over a row-major unknown ordering are banded with half-bandwidth
//! one (1D) or one row plus one (2D).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision at pivot {0}")]
    Singular(usize),
    #[error("matrix is not positive definite (pivot {index} = {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("right-hand side has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Square band matrix with `lower` sub- and `upper` super-diagonals.
///
/// Storage reserves `lower` extra super-diagonals for the fill produced by
/// row pivoting, so an LU factorization can run in place on a clone.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        BandMatrix {
            n,
            lower,
            upper,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper + self.lower);
        i * self.width + (j + self.lower - i)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.lower >= i && j <= i + self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.data[s] += shift;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::Dimension {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let kl = self.lower;
        let ku_fill = self.upper + self.lower;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.data[a.slot(k, k)].abs();
            for r in k + 1..=last {
                let v = a.data[a.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-14 * scale {
                return Err(LinalgError::Singular(k));
            }
            let jmax = (k + ku_fill).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (sk, sp) = (a.slot(k, j), a.slot(p, j));
                    a.data.swap(sk, sp);
                }
                x.swap(k, p);
            }
            let pivot = a.data[a.slot(k, k)];
            for r in k + 1..=last {
                let sr = a.slot(r, k);
                let l = a.data[sr] / pivot;
                if l == 0.0 {
                    continue;
                }
                a.data[sr] = 0.0;
                for j in k + 1..=jmax {
                    let skj = a.slot(k, j);
                    let srj = a.slot(r, j);
                    a.data[srj] -= l * a.data[skj];
                }
                x[r] -= l * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku_fill).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= a.data[a.slot(k, j)] * x[j];
            }
            x[k] = s / a.data[a.slot(k, k)];
        }
        Ok(x)
    }

    /// Solves `A x = b` for symmetric positive definite `A`, reading only the
    /// lower band. Fails without a result if a pivot is not positive.
    pub fn cholesky_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.cholesky()?.solve(b)
    }

    /// Banded Cholesky factor `A = L Lᵀ` of the lower band.
    pub fn cholesky(&self) -> Result<BandCholesky, LinalgError> {
        let n = self.n;
        let kl = self.lower;
        // L stored row-wise: l[i][kl - (i - j)] for j in i-kl..=i
        let w = kl + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            for j in j0..=i {
                let mut s = self.get(i, j);
                let k0 = j0.max(j.saturating_sub(kl));
                for k in k0..j {
                    s -= l[i * w + (k + kl - i)] * l[j * w + (k + kl - j)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { index: i, value: s });
                    }
                    l[i * w + kl] = s.sqrt();
                } else {
                    l[i * w + (j + kl - i)] = s / l[j * w + kl];
                }
            }
        }
        Ok(BandCholesky { n, kl, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kl: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let (n, kl, l) = (self.n, self.kl, &self.l);
        if b.len() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let w = kl + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(kl)..i {
                s -= l[i * w + (k + kl - i)] * y[k];
            }
            y[i] = s / l[i * w + kl];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..=(i + kl).min(n - 1) {
                s -= l[k * w + (i + kl - k)] * y[k];
            }
            y[i] = s / l[i * w + kl];
        }
        Ok(y)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
