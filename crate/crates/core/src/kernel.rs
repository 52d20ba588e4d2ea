//! Nadaraya–Watson smoothing of implied volatilities, the comparison baseline.
//!
//! The smoother works in moneyness `K/F`, with bandwidth
//! `h = (c / log n) · n^{−1/5}`. Prices come from Black's formula at the
//! smoothed vol, densities from second differences of those prices and deltas
//! from the smile held fixed in moneyness.

use serde::{Deserialize, Serialize};

use crate::basis::Interval;
use crate::error::{IcosError, Result};
use crate::market::{implied_vol, OptionChain, Right};
use crate::models::black_scholes::{black_price, black_vega, norm_cdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwSmoother {
    moneyness: Vec<f64>,
    vols: Vec<f64>,
    pub forward: f64,
    pub rate: f64,
    pub maturity: f64,
    pub bandwidth: f64,
    /// Finite-difference step for densities (the strike spacing).
    pub step: f64,
    pub interval: Interval,
    /// Quotes whose implied vol could not be inverted and were left out.
    pub dropped: usize,
}

pub fn bandwidth(c: f64, n: usize) -> f64 {
    let nf = n as f64;
    c / nf.ln() * nf.powf(-0.2)
}

pub fn nw_fit(chain: &OptionChain, c: f64) -> Result<NwSmoother> {
    if !(c > 0.0) {
        return Err(IcosError::InvalidInput(format!(
            "bandwidth constant must be positive, got {c}"
        )));
    }
    let t = chain.maturity();
    let mut moneyness = Vec::with_capacity(chain.len());
    let mut vols = Vec::with_capacity(chain.len());
    let mut dropped = 0;
    for (&k, &o) in chain.strikes.iter().zip(&chain.otm_prices) {
        match implied_vol(o, chain.forward, k, chain.rate, t, chain.right_at(k)) {
            Ok(v) => {
                moneyness.push(k / chain.forward);
                vols.push(v);
            }
            Err(IcosError::PriceOutOfBounds { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if vols.len() < 2 {
        return Err(IcosError::TooFewStrikes {
            found: vols.len(),
            required: 2,
        });
    }
    let n = chain.len();
    let step = (chain.strikes[n - 1] - chain.strikes[0]) / (n - 1) as f64;
    Ok(NwSmoother {
        moneyness,
        vols,
        forward: chain.forward,
        rate: chain.rate,
        maturity: t,
        bandwidth: bandwidth(c, n),
        step,
        interval: chain.interval(),
        dropped,
    })
}

impl NwSmoother {
    /// Normalised kernel weights at strike `k`.
    pub fn weights(&self, k: f64) -> Result<Vec<f64>> {
        let m = k / self.forward;
        let raw: Vec<f64> = self
            .moneyness
            .iter()
            .map(|mi| (-0.5 * ((m - mi) / self.bandwidth).powi(2)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        if !(total > 1e-300) {
            return Err(IcosError::DegenerateKernel(k));
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    pub fn vol(&self, k: f64) -> Result<f64> {
        Ok(self
            .weights(k)?
            .iter()
            .zip(&self.vols)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// `dσ̂/dm` in moneyness.
    pub fn vol_slope(&self, k: f64) -> Result<f64> {
        let m = k / self.forward;
        let w = self.weights(k)?;
        let sig: f64 = w.iter().zip(&self.vols).map(|(w, v)| w * v).sum();
        let h2 = self.bandwidth * self.bandwidth;
        Ok(w.iter()
            .zip(&self.moneyness)
            .zip(&self.vols)
            .map(|((w, mi), v)| -w * (m - mi) / h2 * (v - sig))
            .sum())
    }

    fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    pub fn nw_price(&self, k: f64, right: Right) -> Result<f64> {
        let s = self.vol(k)?;
        Ok(black_price(
            self.forward,
            k,
            s,
            self.discount(),
            self.maturity,
            right,
        ))
    }

    /// Density of `log S_T` at `y` from a centred second difference of the call.
    pub fn nw_rnd(&self, y: f64) -> Result<f64> {
        let s = y.exp();
        let d = self.step;
        for p in [s - d, s + d] {
            self.interval.check(p)?;
        }
        let c = |k: f64| self.nw_price(k, Right::Call);
        let second = (c(s + d)? - 2.0 * c(s)? + c(s - d)?) / (d * d);
        Ok(s * second / self.discount())
    }

    /// Call delta with the smile fixed in moneyness `K/F`.
    pub fn nw_delta(&self, k: f64) -> Result<f64> {
        let sigma = self.vol(k)?;
        let t = self.maturity;
        let sd = sigma * t.sqrt();
        let d1 = ((self.forward / k).ln() + 0.5 * sd * sd) / sd;
        let spot = self.forward * self.discount();
        let vega = black_vega(self.forward, k, sigma, self.discount(), t);
        let m = k / self.forward;
        Ok(norm_cdf(d1) - vega * m / spot * self.vol_slope(k)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BsModel;

    fn chain(sigma: f64) -> OptionChain {
        let m = BsModel::new(4000.0, 0.0, sigma, 30.0 / 365.0).unwrap();
        let strikes: Vec<f64> = (0..201).map(|i| 3400.0 + 5.0 * i as f64).collect();
        let prices = strikes.iter().map(|&k| m.otm(k)).collect();
        OptionChain::new(30.0, 0.0, 4000.0, strikes, prices).unwrap()
    }

    #[test]
    fn constant_smile_is_reproduced() {
        let s = nw_fit(&chain(0.3), 0.1).unwrap();
        for k in [3400.0, 3777.0, 4400.0] {
            assert!((s.vol(k).unwrap() - 0.3).abs() < 1e-9);
            let w = s.weights(k).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let m = BsModel::new(4000.0, 0.0, 0.3, 30.0 / 365.0).unwrap();
        assert!((s.nw_delta(4000.0).unwrap() - m.delta_call(4000.0)).abs() < 1e-8);
        let y = 3900f64.ln();
        assert!((s.nw_rnd(y).unwrap() - m.rnd_log(y)).abs() < 1e-3);
    }

    #[test]
    fn small_bandwidth_interpolates_nodes() {
        // a smile that varies across strikes
        let c = chain(0.3);
        let prices: Vec<f64> = c
            .strikes
            .iter()
            .map(|&k| {
                let v = 0.25 + 0.5 * (k / 4000.0 - 1.0).powi(2);
                black_price(4000.0, k, v, 1.0, c.maturity(), c.right_at(k))
            })
            .collect();
        let c = c.with_prices(prices.clone()).unwrap();
        let s = nw_fit(&c, 1e-3).unwrap();
        for i in [0, 50, 100, 150, 200] {
            let k = c.strikes[i];
            let p = s.nw_price(k, c.right_at(k)).unwrap();
            assert!((p - prices[i]).abs() < 1e-8, "{k}");
        }
    }

    #[test]
    fn density_integrates_to_truncated_mass() {
        let s = nw_fit(&chain(0.3), 0.5).unwrap();
        let (lo, hi) = ((3400.0f64 + 5.0).ln(), (4400.0f64 - 5.0).ln());
        let n = 400;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * s.nw_rnd(lo + i as f64 * h).unwrap();
        }
        let m = BsModel::new(4000.0, 0.0, 0.3, 30.0 / 365.0).unwrap();
        let want = m.mass_between(3405.0, 4395.0);
        assert!((acc * h / 3.0 - want).abs() < 1e-3);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let c = chain(0.3);
        let prices: Vec<f64> = c
            .strikes
            .iter()
            .map(|&k| {
                black_price(
                    4000.0,
                    k,
                    0.2 + 0.3 * (1.0 - k / 4000.0).abs(),
                    1.0,
                    c.maturity(),
                    c.right_at(k),
                )
            })
            .collect();
        let s = nw_fit(&c.with_prices(prices).unwrap(), 0.1).unwrap();
        let k = 3900.0;
        let dk = 1e-3;
        let fd = (s.vol(k + dk).unwrap() - s.vol(k - dk).unwrap()) / (2.0 * dk) * 4000.0;
        assert!((fd - s.vol_slope(k).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let c = chain(0.3);
        assert!(nw_fit(&c, 0.0).is_err());
        let s = nw_fit(&c, 1e-4).unwrap();
        assert!(matches!(
            s.vol(10_000.0),
            Err(IcosError::DegenerateKernel(_))
        ));
        let s = nw_fit(&c, 0.1).unwrap();
        assert!(s.nw_rnd(3400f64.ln()).is_err());
    }
}
