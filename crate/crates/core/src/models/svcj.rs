//! Stochastic volatility with correlated-in-time jumps in price and variance.
//!
//! Variance jumps are exponential with mean `mu_v`; price jumps are normal and
//! independent of the variance jump size.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CharFn;
use crate::error::{IcosError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcjParams {
    pub v0: f64,
    pub kappa: f64,
    pub vbar: f64,
    pub rho: f64,
    pub sigma_v: f64,
    pub lambda: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
    pub mu_v: f64,
}

impl Default for SvcjParams {
    fn default() -> Self {
        Self {
            v0: 0.01,
            kappa: 2.6,
            vbar: 0.02,
            rho: -0.95,
            sigma_v: 0.3,
            lambda: 1.0,
            mu_j: -0.05,
            sigma_j: 0.03,
            mu_v: 0.05,
        }
    }
}

impl SvcjParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v0 >= 0.0
            && self.kappa > 0.0
            && self.vbar > 0.0
            && self.sigma_v > 0.0
            && self.lambda >= 0.0
            && self.mu_v >= 0.0
            && self.sigma_j >= 0.0
            && self.rho.abs() <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(IcosError::InvalidInput(format!(
                "bad svcj parameters {self:?}"
            )))
        }
    }

    /// Jump compensator `E[e^J] − 1`.
    pub fn mean_jump(&self) -> f64 {
        (self.mu_j + 0.5 * self.sigma_j * self.sigma_j).exp() - 1.0
    }

    /// `E[e^{iuJ}]`.
    pub fn jump_cf(&self, u: Complex64) -> Complex64 {
        let i = Complex64::i();
        (i * u * self.mu_j - 0.5 * self.sigma_j * self.sigma_j * u * u).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcjModel {
    pub params: SvcjParams,
    pub s0: f64,
    pub r: f64,
    pub t: f64,
}

impl SvcjModel {
    pub fn new(params: SvcjParams, s0: f64, r: f64, t: f64) -> Result<Self> {
        params.validate()?;
        if !(s0 > 0.0 && t > 0.0) {
            return Err(IcosError::InvalidInput("svcj needs s0, t > 0".into()));
        }
        Ok(Self { params, s0, r, t })
    }

    pub fn forward(&self) -> f64 {
        self.s0 * (self.r * self.t).exp()
    }

    /// Characteristic function at a complex argument; real `u` is the usual case,
    /// `u = −i` gives `E[S_T]`.
    pub fn cf_complex(&self, u: Complex64) -> Complex64 {
        let p = &self.params;
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let t = self.t;
        let s2 = p.sigma_v * p.sigma_v;

        let beta = p.kappa - i * p.rho * p.sigma_v * u;
        let d = (beta * beta + s2 * (i * u + u * u)).sqrt();
        // β − d written without cancellation so that small σ_v stays accurate
        let quad = i * u + u * u;
        let beta_minus_d = -s2 * quad / (beta + d);
        let g = beta_minus_d / (beta + d);
        let e = (-d * t).exp();
        let a = -quad / (beta + d);
        let b_t = a * (one - e) / (one - g * e);

        let diffusive = p.kappa * p.vbar * (a * t - 2.0 / s2 * ln_1p(g * (one - e) / (one - g)));

        // ∫_0^T ds / (1 − μ_v B(s)) in closed form
        let pp = one - p.mu_v * a;
        let qq = g - p.mu_v * a;
        let x = (one - e) / (pp - qq);
        let log_term = if qq.norm() < 1e-10 {
            x * (one - 0.5 * qq * x)
        } else {
            (one + qq * x).ln() / qq
        };
        let integral = t / pp + p.mu_v * a * (g - one) / (pp * d) * log_term;

        let jumps = p.lambda * (p.jump_cf(u) * integral - t) - i * u * p.lambda * p.mean_jump() * t;

        (i * u * (self.s0.ln() + self.r * t) + diffusive + jumps + b_t * p.v0).exp()
    }

    /// Time-averaged expected variance over `[0, T]`, ignoring the jump drift.
    pub fn mean_variance(&self) -> f64 {
        let p = &self.params;
        let kt = p.kappa * self.t;
        p.vbar + (p.v0 - p.vbar) * (1.0 - (-kt).exp()) / kt
    }
}

impl CharFn for SvcjModel {
    fn cf(&self, u: f64) -> Complex64 {
        self.cf_complex(Complex64::new(u, 0.0))
    }

    fn log_mean(&self) -> f64 {
        self.s0.ln() + (self.r - 0.5 * self.mean_variance()) * self.t
    }

    fn spot(&self) -> f64 {
        self.s0
    }

    fn rate(&self) -> f64 {
        self.r
    }

    fn maturity(&self) -> f64 {
        self.t
    }
}

fn ln_1p(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        z - z * z / 2.0 + z * z * z / 3.0 - z * z * z * z / 4.0
    } else {
        (1.0 + z).ln()
    }
}
