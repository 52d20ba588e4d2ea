//! Synthetic chains standing in for market data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{IcosError, Result};
use crate::market::{chain_from_quotes, OptionChain, OptionQuote, Right, DAYS_PER_YEAR};
use crate::models::black_scholes::{black_price, norm_pdf};
use crate::models::svcj::{SvcjModel, SvcjParams};
use crate::models::{BsModel, CosPricer};

pub const MC_SPOT: f64 = 4000.0;
pub const MC_NOISE: f64 = 0.025;
/// Strikes of the Monte Carlo tables, as fractions of the forward.
pub const MC_TARGET_MONEYNESS: [f64; 6] = [0.86, 0.9, 0.95, 1.0, 1.05, 1.09];
pub const TICK: f64 = 0.05;

/// `0.85·S_0 ..= 1.10·S_0` in steps of 5 (201 strikes).
pub fn mc_strikes() -> Vec<f64> {
    (0..201).map(|i| 3400.0 + 5.0 * i as f64).collect()
}

pub fn mc_targets() -> Vec<f64> {
    MC_TARGET_MONEYNESS
        .iter()
        .map(|m| (m * MC_SPOT).round())
        .collect()
}

pub fn uniform_strikes(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

pub fn bs_chain(sigma: f64, expiry_days: f64, strikes: &[f64]) -> Result<(BsModel, OptionChain)> {
    let m = BsModel::new(MC_SPOT, 0.0, sigma, expiry_days / DAYS_PER_YEAR)?;
    let prices = strikes.iter().map(|&k| m.otm(k)).collect();
    let chain = OptionChain::new(expiry_days, 0.0, m.forward(), strikes.to_vec(), prices)?;
    Ok((m, chain))
}

pub fn svcj_chain(
    params: SvcjParams,
    expiry_days: f64,
    strikes: &[f64],
) -> Result<(SvcjModel, OptionChain)> {
    let m = SvcjModel::new(params, MC_SPOT, 0.0, expiry_days / DAYS_PER_YEAR)?;
    let prices = CosPricer::default().otm_prices(&m, strikes, m.forward());
    // the far wings can price a hair below zero in floating point
    let prices = prices.into_iter().map(|p: f64| p.max(0.0)).collect();
    let chain = OptionChain::new(expiry_days, 0.0, m.forward(), strikes.to_vec(), prices)?;
    Ok((m, chain))
}

pub fn add_noise(chain: &OptionChain, scale: f64, rng: &mut ChaCha8Rng) -> Result<OptionChain> {
    let prices = chain
        .otm_prices
        .iter()
        .map(|o| {
            let e: f64 = StandardNormal.sample(rng);
            o + scale * e
        })
        .collect();
    chain.with_prices(prices)
}

pub const SPX_FORWARD: f64 = 4008.5;
pub const SPX_DAYS: f64 = 29.0;
pub const SPX_RATE: f64 = 0.001;

/// 13 wing strikes 25 apart, then 226 strikes 5 apart up to 4400.
pub fn spx_strikes() -> Vec<f64> {
    let mut k = uniform_strikes(2950.0, 3250.0, 25.0);
    k.extend(uniform_strikes(3275.0, 4400.0, 5.0));
    k
}

fn spx_model() -> Result<SvcjModel> {
    let params = SvcjParams {
        v0: 0.025,
        vbar: 0.03,
        ..SvcjParams::default()
    };
    let t = SPX_DAYS / DAYS_PER_YEAR;
    SvcjModel::new(params, SPX_FORWARD * (-SPX_RATE * t).exp(), SPX_RATE, t)
}

/// SPX-like quotes on both sides of every strike, plus one zero-bid put at 2925.
///
/// With `noise` the mids get independent `N(0, noise²)` perturbations and quotes
/// whose bid would not be positive become zero-bid quotes.
pub fn spx_like_quotes(noise: Option<(f64, u64)>) -> Result<Vec<OptionQuote>> {
    let m = spx_model()?;
    let pricer = CosPricer::default();
    let strikes = spx_strikes();
    let calls = pricer.prices(&m, &strikes, Right::Call);
    let df = (-SPX_RATE * m.t).exp();
    let mut rng = noise.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    let mut quotes = vec![OptionQuote::new(2925.0, 0.0, 0.05, Right::Put)?];
    for (&k, &c) in strikes.iter().zip(&calls) {
        // puts from parity so the implied forward is exact
        let p = c - df * (SPX_FORWARD - k);
        for (mid, right) in [(c, Right::Call), (p, Right::Put)] {
            let mid = match (&mut rng, noise) {
                (Some(r), Some((s, _))) => {
                    let e: f64 = StandardNormal.sample(r);
                    mid + s * e
                }
                _ => mid,
            };
            let half = (0.5 * TICK).min(0.5 * mid.max(0.0));
            let (bid, ask) = if mid - half > 0.0 {
                (mid - half, mid + half)
            } else {
                (0.0, TICK)
            };
            quotes.push(OptionQuote::new(k, bid, ask, right)?);
        }
    }
    Ok(quotes)
}

pub fn spx_like_chain() -> Result<OptionChain> {
    chain_from_quotes(SPX_DAYS, SPX_RATE, None, &spx_like_quotes(None)?)
}

/// The SPX-like chain with tick-scale noise on every quote.
pub fn spx_like_noisy_chain(seed: u64) -> Result<OptionChain> {
    chain_from_quotes(
        SPX_DAYS,
        SPX_RATE,
        Some(SPX_FORWARD),
        &spx_like_quotes(Some((TICK, seed)))?,
    )
}

/// Mixture of lognormals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LognormalMixture {
    pub weights: Vec<f64>,
    pub forwards: Vec<f64>,
    pub sigma: f64,
    pub t: f64,
}

impl LognormalMixture {
    pub fn forward(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.forwards)
            .map(|(w, f)| w * f)
            .sum()
    }

    pub fn price(&self, k: f64, right: Right) -> f64 {
        self.weights
            .iter()
            .zip(&self.forwards)
            .map(|(w, &f)| w * black_price(f, k, self.sigma, 1.0, self.t, right))
            .sum()
    }

    pub fn rnd_log(&self, y: f64) -> f64 {
        let sd = self.sigma * self.t.sqrt();
        self.weights
            .iter()
            .zip(&self.forwards)
            .map(|(w, f)| w * norm_pdf((y - f.ln() + 0.5 * sd * sd) / sd) / sd)
            .sum()
    }
}

pub const BIMODAL_SPOT: f64 = 1518.96;
pub const BIMODAL_MODES: [f64; 2] = [1442.0, 1590.0];

/// Two lognormal components whose log-densities peak near 1442 and 1590,
/// weighted so the forward equals the spot (zero rate), on `[1250, 1760]`.
pub fn bimodal_chain() -> Result<(LognormalMixture, OptionChain)> {
    let days = 30.0;
    let t = days / DAYS_PER_YEAR;
    let sd = 0.03;
    let sigma = sd / t.sqrt();
    let forwards: Vec<f64> = BIMODAL_MODES
        .iter()
        .map(|m| m * (0.5 * sd * sd).exp())
        .collect();
    let w2 = (BIMODAL_SPOT - forwards[0]) / (forwards[1] - forwards[0]);
    if !(0.0..=1.0).contains(&w2) {
        return Err(IcosError::InvalidInput(
            "bimodal weights out of range".into(),
        ));
    }
    let mix = LognormalMixture {
        weights: vec![1.0 - w2, w2],
        forwards,
        sigma,
        t,
    };
    let strikes = uniform_strikes(1250.0, 1760.0, 2.5);
    let f = mix.forward();
    let prices = strikes
        .iter()
        .map(|&k| mix.price(k, if k <= f { Right::Put } else { Right::Call }))
        .collect();
    let chain = OptionChain::new(days, 0.0, f, strikes, prices)?;
    Ok((mix, chain))
}

/// Near and next tenors of one synthetic trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixDay {
    pub sigma: f64,
    pub near: OptionChain,
    pub next: OptionChain,
}

pub const VIX_NEAR_DAYS: f64 = 23.0;
pub const VIX_NEXT_DAYS: f64 = 37.0;

/// Black-Scholes chains for both tenors on a fixed strike grid.
pub fn vix_day(
    sigma: f64,
    strikes: &[f64],
    noise: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<VixDay> {
    let (_, near) = bs_chain(sigma, VIX_NEAR_DAYS, strikes)?;
    let (_, next) = bs_chain(sigma, VIX_NEXT_DAYS, strikes)?;
    let (near, next) = match noise {
        Some((s, rng)) => (add_noise(&near, s, rng)?, add_noise(&next, s, rng)?),
        None => (near, next),
    };
    Ok(VixDay { sigma, near, next })
}

/// Smallest exact OTM price kept on a panel grid, far above the quote noise.
pub const VIX_MIN_PRICE: f64 = 0.5;

/// Uniform grid in steps of `step`, cut to the strikes whose exact near-tenor
/// OTM price at volatility `sigma` is at least [`VIX_MIN_PRICE`].
pub fn vix_strikes(sigma: f64, step: f64) -> Result<Vec<f64>> {
    let m = BsModel::new(MC_SPOT, 0.0, sigma, VIX_NEAR_DAYS / DAYS_PER_YEAR)?;
    let sd = sigma * (VIX_NEXT_DAYS / DAYS_PER_YEAR).sqrt();
    let lo = (MC_SPOT * (-6.0 * sd).exp() / step).floor() * step;
    let hi = (MC_SPOT * (6.0 * sd).exp() / step).ceil() * step;
    Ok(uniform_strikes(lo, hi, step)
        .into_iter()
        .filter(|&k| m.otm(k) >= VIX_MIN_PRICE)
        .collect())
}

/// A block of panel days with a common volatility path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VixRegime {
    pub days: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub step: f64,
}

impl VixRegime {
    /// 200 days whose volatility swings once between 12% and 30%.
    pub const LOW: VixRegime = VixRegime {
        days: 200,
        sigma_lo: 0.12,
        sigma_hi: 0.3,
        step: 20.0,
    };
    /// 50 days at 80%.
    pub const HIGH: VixRegime = VixRegime {
        days: 50,
        sigma_lo: 0.8,
        sigma_hi: 0.8,
        step: 50.0,
    };

    fn sigma(&self, d: usize) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * d as f64 / self.days as f64;
        self.sigma_lo + (self.sigma_hi - self.sigma_lo) * 0.5 * (1.0 - phase.cos())
    }
}

/// Volatility is bucketed to 0.02 for the grid so nearby days share strikes.
const VIX_BUCKET: f64 = 0.02;

/// Days of every regime in order, observed with `N(0, noise²)` quote errors.
pub fn vix_panel(regimes: &[VixRegime], noise: f64, seed: u64) -> Result<Vec<VixDay>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for r in regimes {
        for d in 0..r.days {
            let sigma = r.sigma(d);
            let bucket = (sigma / VIX_BUCKET - 1e-9).floor() * VIX_BUCKET;
            let strikes = vix_strikes(bucket.max(VIX_BUCKET), r.step)?;
            out.push(vix_day(sigma, &strikes, Some((noise, &mut rng)))?);
        }
    }
    Ok(out)
}
