//! Ground-truth generators used to build synthetic chains and score estimates.

pub mod black_scholes;
pub mod cos;
pub mod svcj;

pub use black_scholes::{black_price, BsModel};
pub use cos::CosPricer;
pub use svcj::SvcjParams;

use num_complex::Complex64;

/// Characteristic function of `log S_T`.
pub trait CharFn: Sync {
    fn cf(&self, u: f64) -> Complex64;
    /// Mean of `log S_T`, used to centre truncation ranges.
    fn log_mean(&self) -> f64;
    fn spot(&self) -> f64;
    fn rate(&self) -> f64;
    fn maturity(&self) -> f64;
}
