use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::CharFn;
use crate::error::{IcosError, Result};
use crate::market::Right;

fn std_normal() -> Normal {
    Normal::standard()
}

pub(crate) fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub(crate) fn norm_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

/// Black's formula on the forward: `df·(F Φ(d1) − K Φ(d2))` for calls.
pub fn black_price(forward: f64, strike: f64, sigma: f64, df: f64, t: f64, right: Right) -> f64 {
    let sd = sigma * t.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match right {
        Right::Call => df * (forward * norm_cdf(d1) - strike * norm_cdf(d2)),
        Right::Put => df * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1)),
    }
}

/// `∂ price / ∂σ` for Black's formula.
pub fn black_vega(forward: f64, strike: f64, sigma: f64, df: f64, t: f64) -> f64 {
    let sd = sigma * t.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    df * forward * norm_pdf(d1) * t.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsModel {
    pub s0: f64,
    pub r: f64,
    pub sigma: f64,
    pub t: f64,
}

impl BsModel {
    pub fn new(s0: f64, r: f64, sigma: f64, t: f64) -> Result<Self> {
        if !(s0 > 0.0 && sigma > 0.0 && t > 0.0) {
            return Err(IcosError::InvalidInput(format!(
                "black-scholes needs s0, sigma, t > 0 (got {s0}, {sigma}, {t})"
            )));
        }
        Ok(Self { s0, r, sigma, t })
    }

    pub fn forward(&self) -> f64 {
        self.s0 * (self.r * self.t).exp()
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.t).exp()
    }

    fn d1(&self, k: f64) -> f64 {
        let sd = self.sigma * self.t.sqrt();
        ((self.s0 / k).ln() + (self.r + 0.5 * self.sigma * self.sigma) * self.t) / sd
    }

    fn d2(&self, k: f64) -> f64 {
        self.d1(k) - self.sigma * self.t.sqrt()
    }

    pub fn price(&self, k: f64, right: Right) -> f64 {
        black_price(
            self.forward(),
            k,
            self.sigma,
            self.discount(),
            self.t,
            right,
        )
    }

    pub fn call(&self, k: f64) -> f64 {
        self.price(k, Right::Call)
    }

    pub fn put(&self, k: f64) -> f64 {
        self.price(k, Right::Put)
    }

    /// OTM price: put at or below the forward, call above.
    pub fn otm(&self, k: f64) -> f64 {
        if k <= self.forward() {
            self.put(k)
        } else {
            self.call(k)
        }
    }

    pub fn delta_call(&self, k: f64) -> f64 {
        norm_cdf(self.d1(k))
    }

    /// Density of `log S_T` at `y`.
    pub fn rnd_log(&self, y: f64) -> f64 {
        let sd = self.sigma * self.t.sqrt();
        norm_pdf((y - self.log_mean()) / sd) / sd
    }

    /// `∂C/∂K`.
    pub fn call_strike_deriv(&self, k: f64) -> f64 {
        -self.discount() * norm_cdf(self.d2(k))
    }

    /// `∂P/∂K`.
    pub fn put_strike_deriv(&self, k: f64) -> f64 {
        self.discount() * norm_cdf(-self.d2(k))
    }

    /// `Q(α ≤ S_T ≤ β)`.
    pub fn mass_between(&self, alpha: f64, beta: f64) -> f64 {
        let sd = self.sigma * self.t.sqrt();
        let z = |s: f64| (s.ln() - self.log_mean()) / sd;
        norm_cdf(z(beta)) - norm_cdf(z(alpha))
    }
}

impl CharFn for BsModel {
    fn cf(&self, u: f64) -> Complex64 {
        let var = self.sigma * self.sigma * self.t;
        (Complex64::new(0.0, u * self.log_mean()) - 0.5 * var * u * u).exp()
    }

    fn log_mean(&self) -> f64 {
        self.s0.ln() + (self.r - 0.5 * self.sigma * self.sigma) * self.t
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
