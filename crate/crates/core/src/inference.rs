//! Feasible error covariance and sandwich variances for every estimator.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{IcosError, Result};
use crate::estimators::{FitDesign, IcosFit, Target};

/// Diagonal observation-error covariance with its degrees-of-freedom correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCovariance {
    pub sigma2: Vec<f64>,
    pub nu: f64,
}

impl ErrorCovariance {
    /// `Σ̂ = (n/ν) diag(ê²)`.
    pub fn feasible(residuals: &[f64], nu: f64) -> Result<Self> {
        let n = residuals.len();
        if !(nu > 0.0) {
            return Err(IcosError::DegreesOfFreedom { nu, n, terms: 0 });
        }
        let scale = n as f64 / nu;
        Ok(Self {
            sigma2: residuals.iter().map(|e| scale * e * e).collect(),
            nu,
        })
    }

    pub fn homoskedastic(n: usize, sigma: f64) -> Self {
        Self {
            sigma2: vec![sigma * sigma; n],
            nu: n as f64,
        }
    }

    /// `g Σ g′`.
    pub fn quadratic(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.sigma2).map(|(g, s)| g * g * s).sum()
    }

    pub fn mean_sigma(&self) -> f64 {
        self.sigma2.iter().map(|s| s.sqrt()).sum::<f64>() / self.sigma2.len() as f64
    }
}

pub fn feasible_sigma(fit: &IcosFit) -> ErrorCovariance {
    fit.covariance.clone()
}

/// `Var(θ̂) = R Σ R′` with `R = (Z′Z)⁻¹Z′(I − Ψ)`.
pub fn var_theta(design: &FitDesign, cov: &ErrorCovariance) -> Matrix3<f64> {
    let r = &design.theta_loadings;
    let mut out = Matrix3::zeros();
    for a in 0..3 {
        for b in a..3 {
            let v: f64 = (0..r.ncols())
                .map(|j| r[(a, j)] * r[(b, j)] * cov.sigma2[j])
                .sum();
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

/// The `Ψ` matrix (unit already added to its last column).
pub fn psi_matrix(design: &FitDesign) -> DMatrix<f64> {
    design.psi_matrix()
}

fn var_of(fit: &IcosFit, cov: &ErrorCovariance, target: Target) -> Result<f64> {
    Ok(cov.quadratic(&fit.probe(target)?.weights))
}

pub fn var_call(fit: &IcosFit, cov: &ErrorCovariance, x: f64) -> Result<f64> {
    var_of(fit, cov, Target::Call(x))
}

pub fn var_put(fit: &IcosFit, cov: &ErrorCovariance, x: f64) -> Result<f64> {
    var_of(fit, cov, Target::Put(x))
}

/// Variance of the log-price density estimate, `ν_f²σ_f²`.
pub fn var_rnd(fit: &IcosFit, cov: &ErrorCovariance, y: f64) -> Result<f64> {
    var_of(fit, cov, Target::Rnd(y))
}

/// Variance of the delta estimate, `σ_δ²/S_0²`.
pub fn var_delta(fit: &IcosFit, cov: &ErrorCovariance, x: f64) -> Result<f64> {
    var_of(fit, cov, Target::Delta(x))
}

pub fn var_d(fit: &IcosFit, cov: &ErrorCovariance, m: usize) -> Result<f64> {
    var_of(fit, cov, Target::D(m))
}

/// Variance of `Â_m`, scaled by `e^{2rT}` so it shares units with `Â_m`.
pub fn var_a(fit: &IcosFit, cov: &ErrorCovariance, m: usize) -> Result<f64> {
    var_of(fit, cov, Target::A(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis;
    use crate::estimators::{FitConfig, IcosFit};
    use crate::market::OptionChain;
    use crate::models::BsModel;
    use crate::quadrature::Scheme;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy_chain(days: f64, seed: u64) -> OptionChain {
        let m = BsModel::new(4000.0, 0.0, 0.3, days / 365.0).unwrap();
        let strikes: Vec<f64> = (0..201).map(|i| 3400.0 + 5.0 * i as f64).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let prices = strikes
            .iter()
            .map(|&k| {
                let e: f64 = StandardNormal.sample(&mut rng);
                m.otm(k) + 0.025 * e
            })
            .collect();
        OptionChain::new_unsigned(days, 0.0, 4000.0, strikes, prices).unwrap()
    }

    #[test]
    fn dof_matches_expanded_trace_formula() {
        let strikes: Vec<f64> = (0..201).map(|i| 3400.0 + 5.0 * i as f64).collect();
        for terms in [1, 7, 14, 25] {
            let d = FitDesign::new(&strikes, Scheme::Simpson, terms, 25).unwrap();
            let n = strikes.len();
            let zz = DMatrix::from_fn(3, 3, |i, j| d.ztz_inv[(i, j)]);
            let q = DMatrix::identity(n, n) - &d.z * zz * d.z.transpose();
            let psi = &d.psi_matrix();
            let expanded =
                q.trace() - 2.0 * (&q * psi).trace() + (&q * psi * psi.transpose()).trace();
            assert!(
                (d.nu - expanded).abs() < 1e-8 * expanded.abs().max(1.0),
                "N={terms}"
            );
            assert!((q.trace() - (n as f64 - 3.0)).abs() < 1e-8);
            if terms == 1 {
                // Ψ is the unit column, which the intercept absorbs
                assert!((d.nu - (n as f64 - 3.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sandwich_matches_three_term_formula() {
        let chain = noisy_chain(30.0, 11);
        let fit = IcosFit::new(&chain, &FitConfig::new(14)).unwrap();
        let d = &fit.design;
        let n = d.n();
        let sig =
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(fit.covariance.sigma2.clone()));
        let zz = DMatrix::from_fn(3, 3, |i, j| d.ztz_inv[(i, j)]);
        let psi = &d.psi_matrix();
        let vt = &zz
            * d.z.transpose()
            * (&sig - 2.0 * psi * &sig + psi * &sig * psi.transpose())
            * &d.z
            * &zz;
        for a in 0..3 {
            for b in 0..3 {
                let lhs = fit.var_theta[(a, b)];
                let rhs = 0.5 * (vt[(a, b)] + vt[(b, a)]);
                assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1e-12), "{a}{b}");
            }
        }
        // call variance: σ̄² + z′Var(θ̂)z + 2z′(Z′Z)⁻¹Z′(I−Ψ)Σψ_w′, ψ_w carrying the +1
        for x in [3800.0, 4400.0] {
            let iv = d.interval();
            let h = basis::h_call_row(14, x, &iv);
            let (zc, zp) = basis::z_terms(14, x, &iv).unwrap();
            let mut psi_w: Vec<f64> = (0..n)
                .map(|j| d.omega[j] * (1..14).map(|m| d.psi[(j, m)] * h[m]).sum::<f64>())
                .collect();
            psi_w[n - 1] += 1.0;
            let bar: f64 = psi_w
                .iter()
                .zip(&fit.covariance.sigma2)
                .map(|(p, s)| p * p * s)
                .sum();
            let z = nalgebra::Vector3::new(1.0, zc, zp);
            let mid = (z.transpose() * fit.var_theta * z)[0];
            let cross_vec = &zz * d.z.transpose() * (DMatrix::identity(n, n) - psi) * &sig;
            let cross: f64 = (0..3)
                .map(|k| z[k] * (0..n).map(|j| cross_vec[(k, j)] * psi_w[j]).sum::<f64>())
                .sum();
            let expanded = bar + mid + 2.0 * cross;
            let ours = var_call(&fit, &fit.covariance, x).unwrap();
            assert!(
                (expanded - ours).abs() < 1e-10 * ours,
                "{expanded} vs {ours}"
            );
        }
    }

    #[test]
    fn feasible_sigma_recovers_noise_scale() {
        let mut means = Vec::new();
        for seed in 0..20 {
            let chain = noisy_chain(30.0, seed);
            let fit = IcosFit::new(&chain, &FitConfig::new(14)).unwrap();
            let cov = feasible_sigma(&fit);
            assert!(cov.nu > 0.0 && cov.nu <= 201.0);
            means.push(cov.mean_sigma());
        }
        // E|e| = σ√(2/π) for normal residuals
        let avg =
            means.iter().sum::<f64>() / means.len() as f64 / (2.0 / std::f64::consts::PI).sqrt();
        assert!((0.02..=0.03).contains(&avg), "{avg}");
    }

    #[test]
    fn zero_noise_residuals_sit_at_the_bias_floor() {
        let m = BsModel::new(4000.0, 0.0, 0.3, 30.0 / 365.0).unwrap();
        let strikes: Vec<f64> = (0..201).map(|i| 3400.0 + 5.0 * i as f64).collect();
        let prices = strikes.iter().map(|&k| m.otm(k)).collect();
        let chain = OptionChain::new(30.0, 0.0, 4000.0, strikes, prices).unwrap();
        let fit = IcosFit::new(&chain, &FitConfig::new(14)).unwrap();
        let max = fit.covariance.sigma2.iter().copied().fold(0.0, f64::max);
        assert!(max < 0.05f64.powi(2) * 1e-2, "{max}");
    }

    #[test]
    fn variances_are_non_negative() {
        let chain = noisy_chain(30.0, 3);
        let fit = IcosFit::new(
            &chain,
            &FitConfig {
                sine_terms: 25,
                ..FitConfig::new(14)
            },
        )
        .unwrap();
        let cov = feasible_sigma(&fit);
        for x in [3400.0, 3700.0, 4000.0, 4400.0] {
            assert!(var_call(&fit, &cov, x).unwrap() >= 0.0);
            assert!(var_put(&fit, &cov, x).unwrap() >= 0.0);
            assert!(var_delta(&fit, &cov, x).unwrap() >= 0.0);
            assert!(var_rnd(&fit, &cov, x.ln()).unwrap() >= 0.0);
        }
        for m in 0..=14 {
            assert!(var_d(&fit, &cov, m).unwrap() >= 0.0);
            assert!(var_a(&fit, &cov, m).unwrap() >= 0.0);
        }
        // σ_D² = Σ ω²ψ_m²σ²
        let d = &fit.design;
        let direct: f64 = (0..d.n())
            .map(|j| (d.omega[j] * d.psi[(j, 3)]).powi(2) * cov.sigma2[j])
            .sum();
        assert!(
            (var_d(&fit, &cov, 3).unwrap() - direct).abs() < 1e-15 * direct.max(1e-300) + 1e-300
        );
    }
}
