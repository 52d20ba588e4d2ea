//! VIX-style variance strips and the split of observed-minus-corridor
//! volatility into an observation part and a discretisation part.
//!
//! For one chain the index variance is
//! `(2/T) Σ ΔK_i/K_i² e^{rT} O(K_i) − (1/T)(F/K_0 − 1)²`, with `K_0` the
//! largest strike at or below the forward and one-sided `ΔK` at the ends.
//! Two tenors are blended linearly in total variance to 30 days.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IcosError, Result};
use crate::estimators::{DesignCache, FitConfig, IcosFit, Target};
use crate::market::{default_regrid_size, spline_iv_regrid, OptionChain, Right, DAYS_PER_YEAR};
use crate::order::{optimal_n_cached, DEFAULT_MAX_TERMS, DEFAULT_MIN_TERMS};
use crate::quadrature::{integrate, Scheme};

pub const TARGET_DAYS: f64 = 30.0;
pub const CIV_POINTS: usize = 2001;

/// Index of `K_0`, the largest strike not above the forward.
pub fn k0_index(chain: &OptionChain) -> Result<usize> {
    let f = chain.forward;
    let Some(i) = chain.strikes.iter().rposition(|&k| k <= f) else {
        return Err(IcosError::OutOfInterval {
            point: f,
            alpha: chain.strikes[0],
            beta: chain.strikes[chain.len() - 1],
        });
    };
    if f > chain.strikes[chain.len() - 1] {
        return Err(IcosError::OutOfInterval {
            point: f,
            alpha: chain.strikes[0],
            beta: chain.strikes[chain.len() - 1],
        });
    }
    Ok(i)
}

/// Strike increments: centred inside, one-sided at both ends.
pub fn delta_k(strikes: &[f64]) -> Vec<f64> {
    let n = strikes.len();
    (0..n)
        .map(|i| match i {
            0 => strikes[1] - strikes[0],
            _ if i == n - 1 => strikes[n - 1] - strikes[n - 2],
            _ => 0.5 * (strikes[i + 1] - strikes[i - 1]),
        })
        .collect()
}

/// Single-tenor index variance (annualised, not in points) from OTM prices at
/// the chain's strikes.
pub fn vix_variance(chain: &OptionChain, prices: &[f64]) -> Result<f64> {
    if prices.len() != chain.len() {
        return Err(IcosError::LengthMismatch {
            expected: chain.len(),
            found: prices.len(),
        });
    }
    if chain.len() < 3 {
        return Err(IcosError::TooFewStrikes {
            found: chain.len(),
            required: 3,
        });
    }
    let i0 = k0_index(chain)?;
    let t = chain.maturity();
    let growth = (chain.rate * t).exp();
    let sum: f64 = chain
        .strikes
        .iter()
        .zip(delta_k(&chain.strikes))
        .zip(prices)
        .map(|((&k, dk), &q)| dk / (k * k) * q)
        .sum();
    let k0 = chain.strikes[i0];
    Ok(2.0 / t * growth * sum - (chain.forward / k0 - 1.0).powi(2) / t)
}

/// Corridor variance `(2/T) e^{rT} ∫ Ô(x)/x² dx` over the fit interval,
/// by Simpson on `points` nodes. Negative prices count as zero; the second
/// value is how many nodes were floored.
pub fn civ_variance(fit: &IcosFit, points: usize) -> Result<(f64, usize)> {
    if points < 3 || points.is_multiple_of(2) {
        return Err(IcosError::EvenSimpson(points));
    }
    let iv = fit.interval();
    let f = fit.forward;
    let nodes: Vec<f64> = (0..points)
        .map(|j| {
            if j == points - 1 {
                iv.beta
            } else {
                iv.alpha + (iv.beta - iv.alpha) * j as f64 / (points - 1) as f64
            }
        })
        .collect();
    let mut floored = 0;
    let mut vals = Vec::with_capacity(points);
    for &x in &nodes {
        let target = if x <= f {
            Target::Put(x)
        } else {
            Target::Call(x)
        };
        let mut o = fit.point(target)?;
        if o < 0.0 {
            o = 0.0;
            floored += 1;
        }
        vals.push(o / (x * x));
    }
    let integral = integrate(&vals, Scheme::Simpson, &nodes)?;
    let t = fit.maturity;
    Ok((2.0 / t * (fit.rate * t).exp() * integral, floored))
}

/// Blends two tenors' variances to 30 days and returns index points.
pub fn blend(var_near: f64, days_near: f64, var_next: f64, days_next: f64) -> Result<f64> {
    if !(days_near < days_next) {
        return Err(IcosError::InvalidInput(format!(
            "near tenor ({days_near} days) must expire before next tenor ({days_next} days)"
        )));
    }
    let (t1, t2) = (days_near / DAYS_PER_YEAR, days_next / DAYS_PER_YEAR);
    let w1 = (days_next - TARGET_DAYS) / (days_next - days_near);
    let w2 = 1.0 - w1;
    let total = t1 * var_near * w1 + t2 * var_next * w2;
    Ok(100.0 * (total.max(0.0) * DAYS_PER_YEAR / TARGET_DAYS).sqrt())
}

/// Single-tenor value in index points.
pub fn points(var: f64) -> f64 {
    100.0 * var.max(0.0).sqrt()
}

/// OTM prices implied by `fit` at `strikes`.
pub fn fitted_otm(fit: &IcosFit, strikes: &[f64]) -> Result<Vec<f64>> {
    strikes
        .iter()
        .map(|&k| {
            let target = match if k <= fit.forward {
                Right::Put
            } else {
                Right::Call
            } {
                Right::Put => Target::Put(k),
                Right::Call => Target::Call(k),
            };
            fit.point(target)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissectConfig {
    pub scheme: Scheme,
    /// Fixed `N`; `None` selects it per tenor.
    pub terms: Option<usize>,
    pub min_terms: usize,
    pub max_terms: usize,
    /// Fine-grid size; `None` uses [`default_regrid_size`].
    pub regrid: Option<usize>,
    pub civ_points: usize,
}

impl Default for DissectConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Simpson,
            terms: None,
            min_terms: DEFAULT_MIN_TERMS,
            max_terms: DEFAULT_MAX_TERMS,
            regrid: None,
            civ_points: CIV_POINTS,
        }
    }
}

/// Per-tenor pieces of a dissection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenorSplit {
    pub expiry_days: f64,
    pub terms: usize,
    pub var_obs: f64,
    pub var_fit: f64,
    pub var_civ: f64,
    pub floored: usize,
}

/// All quantities in index points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixDecomposition {
    pub vix: f64,
    pub vix_hat: f64,
    pub civ_hat: f64,
    /// Observation error `vix − vix_hat`.
    pub xi_hat: f64,
    /// Discretisation error `vix_hat − civ_hat`.
    pub zeta_hat: f64,
    pub floored: usize,
    pub tenors: Vec<TenorSplit>,
}

fn fit_tenor(
    chain: &OptionChain,
    cfg: &DissectConfig,
    cache: &DesignCache,
) -> Result<(IcosFit, TenorSplit)> {
    let m = cfg
        .regrid
        .unwrap_or_else(|| default_regrid_size(chain.len()));
    let fine = spline_iv_regrid(chain, m)?;
    let terms = match cfg.terms {
        Some(n) => n,
        None => optimal_n_cached(&fine, cfg.scheme, cfg.min_terms, cfg.max_terms, cache)?.n_star,
    };
    let fit_cfg = FitConfig {
        scheme: cfg.scheme,
        ..FitConfig::new(terms)
    };
    let design = cache.get(&fine.strikes, cfg.scheme, terms, fit_cfg.sine_terms)?;
    let fit = IcosFit::with_design(&fine, Arc::clone(&design), fit_cfg.conf)?;
    let var_obs = vix_variance(chain, &chain.otm_prices)?;
    let var_fit = vix_variance(chain, &fitted_otm(&fit, &chain.strikes)?)?;
    let (var_civ, floored) = civ_variance(&fit, cfg.civ_points)?;
    Ok((
        fit,
        TenorSplit {
            expiry_days: chain.expiry_days,
            terms,
            var_obs,
            var_fit,
            var_civ,
            floored,
        },
    ))
}

pub fn dissect(
    near: &OptionChain,
    next: &OptionChain,
    cfg: &DissectConfig,
) -> Result<VixDecomposition> {
    dissect_cached(near, next, cfg, &DesignCache::new())
}

pub fn dissect_cached(
    near: &OptionChain,
    next: &OptionChain,
    cfg: &DissectConfig,
    cache: &DesignCache,
) -> Result<VixDecomposition> {
    // checked first so a bad pair fails before any fitting
    blend(0.0, near.expiry_days, 0.0, next.expiry_days)?;
    let (_, a) = fit_tenor(near, cfg, cache)?;
    let (_, b) = fit_tenor(next, cfg, cache)?;
    let mix = |f: fn(&TenorSplit) -> f64| blend(f(&a), a.expiry_days, f(&b), b.expiry_days);
    let vix = mix(|s| s.var_obs)?;
    let vix_hat = mix(|s| s.var_fit)?;
    let civ_hat = mix(|s| s.var_civ)?;
    Ok(VixDecomposition {
        vix,
        vix_hat,
        civ_hat,
        xi_hat: vix - vix_hat,
        zeta_hat: vix_hat - civ_hat,
        floored: a.floored + b.floored,
        tenors: vec![a, b],
    })
}

/// Dissects every `(near, next)` pair; designs are shared across days.
pub fn dissect_panel(
    days: &[(OptionChain, OptionChain)],
    cfg: &DissectConfig,
) -> Vec<Result<VixDecomposition>> {
    let cache = DesignCache::new();
    days.par_iter()
        .map(|(near, next)| dissect_cached(near, next, cfg, &cache))
        .collect()
}
