//! Rule-of-thumb choice of the number of cosine terms.
//!
//! Terms are added while the recent coefficients still stand out from their
//! own sampling noise: the mean of `log|Â|` over the last three indices is
//! compared with `log σ̂_A` one index back.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{IcosError, Result};
use crate::estimators::{DesignCache, FitDesign, IcosFit, Target};
use crate::market::OptionChain;
use crate::quadrature::Scheme;

pub const DEFAULT_MIN_TERMS: usize = 5;
pub const DEFAULT_MAX_TERMS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub terms: usize,
    pub a_bar: f64,
    pub s_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub n_star: usize,
    pub trace: Vec<TraceRow>,
}

/// `(Â_m, σ̂_A(m))` for m = 1..=N at `N` terms.
pub fn a_profile(chain: &OptionChain, scheme: Scheme, terms: usize) -> Result<Vec<(f64, f64)>> {
    let design = Arc::new(FitDesign::new(&chain.strikes, scheme, terms, 1)?);
    a_profile_with(chain, design)
}

fn a_profile_with(chain: &OptionChain, design: Arc<FitDesign>) -> Result<Vec<(f64, f64)>> {
    let terms = design.terms();
    let fit = IcosFit::with_design(chain, design, 0.95)?;
    (1..=terms)
        .map(|m| {
            let est = fit.estimate(Target::A(m))?;
            Ok((est.value, est.std_err))
        })
        .collect()
}

pub fn optimal_n(
    chain: &OptionChain,
    scheme: Scheme,
    n_min: usize,
    n_max: usize,
) -> Result<OrderSelection> {
    optimal_n_cached(chain, scheme, n_min, n_max, &DesignCache::new())
}

/// As [`optimal_n`], reusing designs across chains that share strikes.
pub fn optimal_n_cached(
    chain: &OptionChain,
    scheme: Scheme,
    n_min: usize,
    n_max: usize,
    cache: &DesignCache,
) -> Result<OrderSelection> {
    if n_min < 2 || n_max <= n_min {
        return Err(IcosError::InvalidInput(format!(
            "need 2 <= n_min < n_max, got {n_min} and {n_max}"
        )));
    }
    let mut n = n_min;
    let mut a_bar = 1.0;
    let mut s_a = 0.0;
    let mut trace = Vec::new();
    while a_bar > s_a && n < n_max {
        n += 1;
        let prof = cache
            .get(&chain.strikes, scheme, n, 1)
            .and_then(|d| a_profile_with(chain, d))
            .map_err(|e| IcosError::Refit {
                terms: n,
                source: Box::new(e),
            })?;
        // prof[k] holds index k + 1
        a_bar =
            (prof[n - 3].0.abs().ln() + prof[n - 2].0.abs().ln() + prof[n - 1].0.abs().ln()) / 3.0;
        s_a = prof[n - 2].1.ln();
        trace.push(TraceRow {
            terms: n,
            a_bar,
            s_a,
        });
    }
    Ok(OrderSelection {
        n_star: n - 1,
        trace,
    })
}
