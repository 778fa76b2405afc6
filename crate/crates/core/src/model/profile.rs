use serde::{Deserialize, Serialize};

/// Smooth switch `Γ` from 0 (for `s <= 0`) to 1 (for `s >= 1`), with its
/// first two derivatives `β = Γ'` and `β'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseProfile {
    /// `Γ(s) = f(s) / (f(s) + f(1 - s))` with `f(s) = exp(-1/s)` for `s > 0`.
    /// C-infinity, flat to all orders at 0 and 1, symmetric about 1/2.
    #[default]
    SmoothStep,
}

impl PhaseProfile {
    pub fn id(&self) -> &'static str {
        match self {
            PhaseProfile::SmoothStep => "smooth-step",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "smooth-step" => Some(PhaseProfile::SmoothStep),
            _ => None,
        }
    }

    /// True when `Γ(1 - s) = 1 - Γ(s)`.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn gamma(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        // Γ = 1 / (1 + e^φ), φ = 1/s - 1/(1-s)
        let phi = 1.0 / s - 1.0 / (1.0 - s);
        if phi > 0.0 {
            let e = (-phi).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + phi.exp())
        }
    }

    pub fn beta(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let (g1g, psi, _) = Self::parts(s);
        g1g * psi
    }

    pub fn beta_prime(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let (g1g, psi, dpsi) = Self::parts(s);
        let gamma = self.gamma(s);
        let beta = g1g * psi;
        beta * (1.0 - 2.0 * gamma) * psi + g1g * dpsi
    }

    /// `Γ(1-Γ)`, `ψ = -φ' = 1/s² + 1/(1-s)²`, and `ψ'`.
    fn parts(s: f64) -> (f64, f64, f64) {
        let t = 1.0 - s;
        let phi = 1.0 / s - 1.0 / t;
        let e = (-phi.abs()).exp();
        if e == 0.0 {
            // ψ overflows where Γ(1-Γ) has underflowed; the products vanish
            return (0.0, 0.0, 0.0);
        }
        let g1g = e / ((1.0 + e) * (1.0 + e));
        let psi = 1.0 / (s * s) + 1.0 / (t * t);
        let dpsi = -2.0 / (s * s * s) + 2.0 / (t * t * t);
        (g1g, psi, dpsi)
    }

    /// `sup |β'|` over (0, 1), by dense sampling.
    pub fn beta_prime_sup(&self) -> f64 {
        (1..20000)
            .map(|k| self.beta_prime(k as f64 / 20000.0).abs())
            .fold(0.0, f64::max)
    }
}
