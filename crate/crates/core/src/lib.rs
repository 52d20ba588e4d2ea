//! Option-implied Fourier-cosine estimation.
//!
//! From one expiry's out-of-the-money option prices this crate estimates the
//! risk-neutral density, interpolated call/put prices and call deltas, each
//! with an asymptotic standard error. Supporting modules provide reference
//! models (Black-Scholes, SVCJ with a COS pricer), a kernel-smoothing
//! baseline, a Monte Carlo harness and a VIX error decomposition.

// `!(x > 0.0)` style guards are how inputs reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fixtures;
pub mod inference;
pub mod kernel;
pub mod market;
pub mod models;
pub mod order;
pub mod quadrature;
pub mod vix;

pub use error::{IcosError, Result};
pub use estimators::{EstimateWithCI, FitConfig, FitDesign, IcosFit, Target, ThetaEstimate};
pub use market::{OptionChain, OptionQuote, Right};
pub use quadrature::{GridKind, Scheme};
