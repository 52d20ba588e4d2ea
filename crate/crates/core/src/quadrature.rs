//! Composite quadrature weights on a strike grid.
//!
//! On a uniform grid the weights `w_i` are the textbook coefficients with the
//! integral approximated by `Σ w_i f(K_i) Δ_n`. On a non-uniform grid the
//! trapezoid rule is folded into per-node weights and `Δ_n = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{IcosError, Result};

/// Relative tolerance on successive spacings for a grid to count as uniform.
pub const UNIFORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    LeftRiemann,
    RightRiemann,
    Trapezoid,
    #[default]
    Simpson,
}

impl Scheme {
    /// Convergence order on smooth integrands.
    pub fn order(self) -> u32 {
        match self {
            Scheme::LeftRiemann | Scheme::RightRiemann => 1,
            Scheme::Trapezoid => 2,
            Scheme::Simpson => 4,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = IcosError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" | "left-riemann" => Ok(Scheme::LeftRiemann),
            "right" | "right-riemann" => Ok(Scheme::RightRiemann),
            "trap" | "trapezoid" => Ok(Scheme::Trapezoid),
            "simpson" | "simpson13" => Ok(Scheme::Simpson),
            other => Err(IcosError::InvalidInput(format!(
                "unknown quadrature scheme '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    Uniform { spacing: f64 },
    NonUniform { spacings: Vec<f64> },
}

impl GridKind {
    pub fn classify(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(IcosError::TooFewStrikes {
                found: nodes.len(),
                required: 2,
            });
        }
        let spacings: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if spacings.iter().any(|&h| h <= 0.0 || !h.is_finite()) {
            return Err(IcosError::InvalidInput(
                "grid nodes must be strictly ascending".into(),
            ));
        }
        let first = spacings[0];
        let uniform = spacings
            .windows(2)
            .all(|w| ((w[1] - w[0]) / first).abs() < UNIFORM_TOLERANCE);
        if uniform {
            let spacing = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
            Ok(GridKind::Uniform { spacing })
        } else {
            Ok(GridKind::NonUniform { spacings })
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, GridKind::Uniform { .. })
    }

    /// `Δ_n` as it multiplies the weights.
    pub fn delta(&self) -> f64 {
        match self {
            GridKind::Uniform { spacing } => *spacing,
            GridKind::NonUniform { .. } => 1.0,
        }
    }
}

/// Weights `(w_1..w_n)`; multiply by [`GridKind::delta`] to integrate.
pub fn weights(scheme: Scheme, grid: &GridKind, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(IcosError::TooFewStrikes {
            found: n,
            required: 2,
        });
    }
    match grid {
        GridKind::Uniform { .. } => uniform_weights(scheme, n),
        GridKind::NonUniform { spacings } => {
            if spacings.len() + 1 != n {
                return Err(IcosError::LengthMismatch {
                    expected: spacings.len() + 1,
                    found: n,
                });
            }
            let mut w = vec![0.0; n];
            for (i, h) in spacings.iter().enumerate() {
                w[i] += 0.5 * h;
                w[i + 1] += 0.5 * h;
            }
            Ok(w)
        }
    }
}

fn uniform_weights(scheme: Scheme, n: usize) -> Result<Vec<f64>> {
    let mut w = vec![1.0; n];
    match scheme {
        Scheme::LeftRiemann => w[n - 1] = 0.0,
        Scheme::RightRiemann => w[0] = 0.0,
        Scheme::Trapezoid => {
            w[0] = 0.5;
            w[n - 1] = 0.5;
        }
        Scheme::Simpson => {
            if n.is_multiple_of(2) {
                return Err(IcosError::EvenSimpson(n));
            }
            // 1-based i: w_i = (3 + (-1)^i) / 3
            for (idx, wi) in w.iter_mut().enumerate().take(n - 1).skip(1) {
                let i = idx + 1;
                *wi = if i % 2 == 0 { 4.0 / 3.0 } else { 2.0 / 3.0 };
            }
            w[0] = 1.0 / 3.0;
            w[n - 1] = 1.0 / 3.0;
        }
    }
    Ok(w)
}

/// Effective per-node weights `w_i Δ_n`.
pub fn effective_weights(scheme: Scheme, nodes: &[f64]) -> Result<Vec<f64>> {
    let grid = GridKind::classify(nodes)?;
    let delta = grid.delta();
    Ok(weights(scheme, &grid, nodes.len())?
        .into_iter()
        .map(|w| w * delta)
        .collect())
}

pub fn integrate(samples: &[f64], scheme: Scheme, nodes: &[f64]) -> Result<f64> {
    if samples.len() != nodes.len() {
        return Err(IcosError::LengthMismatch {
            expected: nodes.len(),
            found: samples.len(),
        });
    }
    let w = effective_weights(scheme, nodes)?;
    Ok(w.iter().zip(samples).map(|(w, f)| w * f).sum())
}
