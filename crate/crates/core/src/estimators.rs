//! Feasible cosine-coefficient, price, density and delta estimators.
//!
//! Each estimator is an affine function of the observed OTM prices. A
//! [`Probe`] records that function once (its loadings on `D̂_m`, `B̂_m`, the
//! boundary prices and `θ̂`, plus the implied per-strike weight vector), so the
//! value and its sandwich variance both come from the same object.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::basis::{self, alt_sign, psi_tilde_u, psi_u, CosineBasis, Interval};
use crate::error::{IcosError, Result};
use crate::inference::ErrorCovariance;
use crate::market::OptionChain;
use crate::quadrature::{effective_weights, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub scheme: Scheme,
    /// Cosine terms `N`.
    pub terms: usize,
    /// Sine terms `Ñ` for the delta.
    pub sine_terms: usize,
    pub conf: f64,
}

impl FitConfig {
    pub fn new(terms: usize) -> Self {
        Self {
            scheme: Scheme::Simpson,
            terms,
            sine_terms: 2 * terms,
            conf: 0.95,
        }
    }
}

/// Everything about a fit that depends only on the strikes, the scheme and the
/// expansion orders. Shared across Monte Carlo replications.
#[derive(Debug, Clone)]
pub struct FitDesign {
    pub basis: CosineBasis,
    pub strikes: Vec<f64>,
    pub scheme: Scheme,
    pub sine_terms: usize,
    /// `w_i Δ_n`.
    pub omega: Vec<f64>,
    /// `ψ_m(K_i)` for m = 0..=N (one extra column feeds `Â_N`).
    pub psi: DMatrix<f64>,
    /// `ψ̃_m(K_i)` for m < Ñ.
    pub psi_tilde: DMatrix<f64>,
    /// `H_m(K_i)` for m < N.
    pub h_strikes: DMatrix<f64>,
    /// Regression design, rows `(1, Z_c^N(K_i), Z_p^N(K_i))`.
    pub z: DMatrix<f64>,
    pub ztz_inv: Matrix3<f64>,
    /// `(Z′Z)⁻¹Z′`.
    pub z_pinv: DMatrix<f64>,
    /// `(Z′Z)⁻¹Z′(I − Ψ)`: loadings of `θ̂` on the observed prices.
    pub theta_loadings: DMatrix<f64>,
    /// Degrees of freedom `ν`.
    pub nu: f64,
}

impl FitDesign {
    pub fn new(strikes: &[f64], scheme: Scheme, terms: usize, sine_terms: usize) -> Result<Self> {
        let n = strikes.len();
        if n < 4 {
            return Err(IcosError::TooFewStrikes {
                found: n,
                required: 4,
            });
        }
        if terms == 0 || sine_terms == 0 {
            return Err(IcosError::InvalidInput(
                "expansion orders must be at least 1".into(),
            ));
        }
        let interval = Interval::new(strikes[0], strikes[n - 1])?;
        let basis = CosineBasis::new(interval, terms);
        let omega = effective_weights(scheme, strikes)?;
        let alpha = interval.alpha;

        let psi = DMatrix::from_fn(n, terms + 1, |i, m| psi_u(interval.u(m), strikes[i], alpha));
        let psi_tilde = DMatrix::from_fn(n, sine_terms, |i, m| {
            psi_tilde_u(interval.u(m), strikes[i], alpha)
        });
        let h_strikes = DMatrix::from_fn(n, terms, |i, m| {
            basis::h_call_u(m, basis.u[m], strikes[i], &interval)
        });

        let mut z = DMatrix::zeros(n, 3);
        for i in 0..n {
            let row: Vec<f64> = h_strikes.row(i).iter().copied().collect();
            let (zc, zp) = basis::z_from_row(&row, strikes[i], &interval);
            z[(i, 0)] = 1.0;
            z[(i, 1)] = zc;
            z[(i, 2)] = zp;
        }
        let ztz: Matrix3<f64> = (z.transpose() * &z).fixed_view::<3, 3>(0, 0).into_owned();
        let svd = ztz.svd(false, false);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        if !(smin > 1e-13 * smax) {
            return Err(IcosError::SingularDesign);
        }
        let ztz_inv = ztz.try_inverse().ok_or(IcosError::SingularDesign)?;
        let zz_dyn = DMatrix::from_fn(3, 3, |i, j| ztz_inv[(i, j)]);
        let z_pinv = zz_dyn * z.transpose();

        let psi_matrix = build_psi_matrix(&psi, &h_strikes, &omega);
        let i_minus_psi = DMatrix::identity(n, n) - &psi_matrix;
        let theta_loadings = &z_pinv * &i_minus_psi;
        // ν = tr((I−Ψ)′ Q (I−Ψ)) = ‖Q(I−Ψ)‖²_F with Q the residual maker
        let resid_maker = &i_minus_psi - &z * &theta_loadings;
        let nu = resid_maker.norm_squared();
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(IcosError::DegreesOfFreedom { nu, n, terms });
        }

        Ok(Self {
            basis,
            strikes: strikes.to_vec(),
            scheme,
            sine_terms,
            omega,
            psi,
            psi_tilde,
            h_strikes,
            z,
            ztz_inv,
            z_pinv,
            theta_loadings,
            nu,
        })
    }

    /// `Ψ` with the unit added to its last column (n × n, built on demand).
    pub fn psi_matrix(&self) -> DMatrix<f64> {
        build_psi_matrix(&self.psi, &self.h_strikes, &self.omega)
    }

    pub fn from_config(strikes: &[f64], cfg: &FitConfig) -> Result<Self> {
        Self::new(strikes, cfg.scheme, cfg.terms, cfg.sine_terms)
    }

    pub fn terms(&self) -> usize {
        self.basis.terms
    }

    pub fn interval(&self) -> Interval {
        self.basis.interval
    }

    pub fn n(&self) -> usize {
        self.strikes.len()
    }
}

/// `Ψ̃_ij = ω_j Σ_{m=1}^{N−1} ψ_m(K_j) H_m(K_i)`, plus one in the last column.
fn build_psi_matrix(psi: &DMatrix<f64>, h_strikes: &DMatrix<f64>, omega: &[f64]) -> DMatrix<f64> {
    let n = omega.len();
    let terms = h_strikes.ncols();
    let mut weighted_psi = psi.columns(1, terms - 1).into_owned();
    for (j, w) in omega.iter().enumerate() {
        weighted_psi.row_mut(j).scale_mut(*w);
    }
    let mut out = h_strikes.columns(1, terms - 1) * weighted_psi.transpose();
    for i in 0..n {
        out[(i, n - 1)] += 1.0;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct DesignKey {
    strikes: Vec<u64>,
    scheme: Scheme,
    terms: usize,
    sine_terms: usize,
}

/// Thread-safe memo of designs keyed by strikes, scheme and expansion orders.
#[derive(Debug, Default)]
pub struct DesignCache {
    map: Mutex<HashMap<DesignKey, Arc<FitDesign>>>,
}

impl DesignCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        strikes: &[f64],
        scheme: Scheme,
        terms: usize,
        sine_terms: usize,
    ) -> Result<Arc<FitDesign>> {
        let key = DesignKey {
            strikes: strikes.iter().map(|k| k.to_bits()).collect(),
            scheme,
            terms,
            sine_terms,
        };
        if let Some(d) = self.map.lock().expect("design cache poisoned").get(&key) {
            return Ok(d.clone());
        }
        // built outside the lock; a concurrent duplicate is harmless
        let design = Arc::new(FitDesign::new(strikes, scheme, terms, sine_terms)?);
        let mut map = self.map.lock().expect("design cache poisoned");
        Ok(map.entry(key).or_insert(design).clone())
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("design cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
}

impl EstimateWithCI {
    pub fn new(value: f64, std_err: f64, z_crit: f64) -> Self {
        Self {
            value,
            std_err,
            lower: value - z_crit * std_err,
            upper: value + z_crit * std_err,
        }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta_bar: f64,
    pub theta_c: f64,
    pub theta_p: f64,
    pub covariance: [[f64; 3]; 3],
}

/// What to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Call(f64),
    Put(f64),
    /// Density of `log S_T` at a log-price.
    Rnd(f64),
    /// Density of `S_T` at a price.
    RndPrice(f64),
    Delta(f64),
    D(usize),
    A(usize),
}

/// A linear functional of the observed prices, see the module docs.
#[derive(Debug, Clone)]
pub struct Probe {
    pub target: Target,
    d_load: Vec<f64>,
    b_load: Vec<f64>,
    c_beta_load: f64,
    p_alpha_load: f64,
    theta_load: [f64; 3],
    /// Per-strike weights `g` with `estimate − E[estimate] = g·ε`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IcosFit {
    pub design: Arc<FitDesign>,
    pub forward: f64,
    pub rate: f64,
    pub maturity: f64,
    pub spot: f64,
    pub c_beta: f64,
    pub p_alpha: f64,
    /// `D̂_0 ..= D̂_N`.
    d_hat: Vec<f64>,
    /// `B̂_0 .. B̂_{Ñ−1}` (boundary-adjusted, `B̂_0 = 0`).
    b_hat: Vec<f64>,
    pub theta: [f64; 3],
    pub residuals: Vec<f64>,
    pub covariance: ErrorCovariance,
    pub var_theta: Matrix3<f64>,
    pub conf: f64,
    z_crit: f64,
}

pub(crate) fn z_critical(conf: f64) -> Result<f64> {
    if !(conf > 0.0 && conf < 1.0) {
        return Err(IcosError::InvalidInput(format!(
            "confidence level must be in (0, 1), got {conf}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + 0.5 * conf))
}

/// `D̂_m` for m = 0..count.
pub fn fit_dm(chain: &OptionChain, design: &FitDesign, count: usize) -> Result<Vec<f64>> {
    check_strikes(chain, design)?;
    let iv = design.interval();
    let df = chain.discount();
    let lf = (chain.forward / iv.alpha).ln();
    let wo: Vec<f64> = design
        .omega
        .iter()
        .zip(&chain.otm_prices)
        .map(|(w, o)| w * o)
        .collect();
    Ok((0..count)
        .map(|m| {
            if m == 0 {
                return df;
            }
            let u = iv.u(m);
            let quad: f64 = if m < design.psi.ncols() {
                design
                    .psi
                    .column(m)
                    .iter()
                    .zip(&wo)
                    .map(|(p, x)| p * x)
                    .sum()
            } else {
                design
                    .strikes
                    .iter()
                    .zip(&wo)
                    .map(|(&k, x)| psi_u(u, k, iv.alpha) * x)
                    .sum()
            };
            df * (u * lf).cos() + quad
        })
        .collect())
}

fn check_strikes(chain: &OptionChain, design: &FitDesign) -> Result<()> {
    if chain.strikes.len() != design.strikes.len() {
        return Err(IcosError::LengthMismatch {
            expected: design.strikes.len(),
            found: chain.strikes.len(),
        });
    }
    if chain.strikes != design.strikes {
        return Err(IcosError::InvalidInput(
            "chain strikes differ from the fit design".into(),
        ));
    }
    Ok(())
}

impl IcosFit {
    pub fn new(chain: &OptionChain, cfg: &FitConfig) -> Result<Self> {
        let design = Arc::new(FitDesign::from_config(&chain.strikes, cfg)?);
        Self::with_design(chain, design, cfg.conf)
    }

    pub fn with_design(chain: &OptionChain, design: Arc<FitDesign>, conf: f64) -> Result<Self> {
        let z_crit = z_critical(conf)?;
        let n = design.n();
        let terms = design.terms();
        let iv = design.interval();
        let df = chain.discount();
        let d_hat = fit_dm(chain, &design, terms + 1)?;

        let calls = chain.call_prices();
        let c_beta = calls[n - 1];
        let p_alpha = chain.put_at_alpha();

        let lf = (chain.forward / iv.alpha).ln();
        let wo: Vec<f64> = design
            .omega
            .iter()
            .zip(&chain.otm_prices)
            .map(|(w, o)| w * o)
            .collect();
        let b_hat = (0..design.sine_terms)
            .map(|m| {
                if m == 0 {
                    return 0.0;
                }
                let u = iv.u(m);
                let quad: f64 = design
                    .psi_tilde
                    .column(m)
                    .iter()
                    .zip(&wo)
                    .map(|(p, x)| p * x)
                    .sum();
                df * (u * lf).sin() + quad - u / iv.beta * alt_sign(m) * c_beta
                    + u / iv.alpha * p_alpha
            })
            .collect();

        // regress C(K_i) − C̄(K_i) − C(β) on (1, Z_c, Z_p)
        let y = DVector::from_fn(n, |i, _| {
            let cbar: f64 = (0..terms)
                .map(|m| {
                    let v = d_hat[m] * design.h_strikes[(i, m)];
                    if m == 0 {
                        0.5 * v
                    } else {
                        v
                    }
                })
                .sum();
            calls[i] - cbar - c_beta
        });
        let th = &design.z_pinv * &y;
        let theta = [th[0], th[1], th[2]];
        let resid = y - &design.z * th;
        let residuals: Vec<f64> = resid.iter().copied().collect();
        let covariance = ErrorCovariance::feasible(&residuals, design.nu)?;
        let var_theta = crate::inference::var_theta(&design, &covariance);

        Ok(Self {
            forward: chain.forward,
            rate: chain.rate,
            maturity: chain.maturity(),
            spot: chain.spot(),
            c_beta,
            p_alpha,
            d_hat,
            b_hat,
            theta,
            residuals,
            covariance,
            var_theta,
            conf,
            z_crit,
            design,
        })
    }

    pub fn terms(&self) -> usize {
        self.design.terms()
    }

    pub fn interval(&self) -> Interval {
        self.design.interval()
    }

    /// `D̂_0 .. D̂_{N−1}`.
    pub fn d_hat(&self) -> &[f64] {
        &self.d_hat[..self.terms()]
    }

    /// `B̂_1 .. B̂_{Ñ−1}`.
    pub fn b_hat(&self) -> &[f64] {
        &self.b_hat[1..]
    }

    pub fn theta_estimate(&self) -> ThetaEstimate {
        let v = &self.var_theta;
        ThetaEstimate {
            theta_bar: self.theta[0],
            theta_c: self.theta[1],
            theta_p: self.theta[2],
            covariance: [
                [v[(0, 0)], v[(0, 1)], v[(0, 2)]],
                [v[(1, 0)], v[(1, 1)], v[(1, 2)]],
                [v[(2, 0)], v[(2, 1)], v[(2, 2)]],
            ],
        }
    }

    fn growth(&self) -> f64 {
        (self.rate * self.maturity).exp()
    }

    /// Builds the linear functional for `target`. Probes stay valid for any fit
    /// that shares this design, rate, maturity and forward.
    pub fn probe(&self, target: Target) -> Result<Probe> {
        let mut probe = self.loads(target)?;
        probe.weights = self.probe_weights(&probe);
        Ok(probe)
    }

    /// Point estimate without the standard error; cheap enough for dense grids.
    pub fn point(&self, target: Target) -> Result<f64> {
        Ok(self.value(&self.loads(target)?))
    }

    fn loads(&self, target: Target) -> Result<Probe> {
        let d = &self.design;
        let iv = d.interval();
        let terms = d.terms();
        let mut d_load = vec![0.0; terms + 1];
        let mut b_load = vec![0.0; d.sine_terms];
        let mut c_beta_load = 0.0;
        let mut p_alpha_load = 0.0;
        let mut theta_load = [0.0; 3];
        let half_first = |v: &mut [f64]| v[0] *= 0.5;

        match target {
            Target::Call(x) => {
                iv.check(x)?;
                let h = basis::h_call_row(terms, x, &iv);
                let (zc, zp) = basis::z_from_row(&h, x, &iv);
                d_load[..terms].copy_from_slice(&h);
                half_first(&mut d_load);
                c_beta_load = 1.0;
                theta_load = [1.0, zc, zp];
            }
            Target::Put(x) => {
                iv.check(x)?;
                let h = basis::h_put_row(terms, x, &iv);
                let (zc, zp) = basis::z_put_from_row(&h, x, &iv);
                d_load[..terms].copy_from_slice(&h);
                half_first(&mut d_load);
                p_alpha_load = 1.0;
                theta_load = [1.0, zc, zp];
            }
            Target::Rnd(_) | Target::RndPrice(_) => {
                let (y, extra) = match target {
                    Target::Rnd(y) => (y, 1.0),
                    Target::RndPrice(s) => {
                        iv.check(s)?;
                        (s.ln(), 1.0 / s)
                    }
                    _ => unreachable!(),
                };
                iv.check_log(y)?;
                let nu_f = 2.0 * self.growth() / iv.width() * extra;
                let hf = basis::h_density_row(terms, y, &iv);
                let mut zc = 0.0;
                let mut zp = 0.0;
                for (m, v) in hf.iter().enumerate() {
                    let w = if m == 0 { 0.5 } else { 1.0 };
                    d_load[m] = nu_f * w * v;
                    zc += w * alt_sign(m) * v;
                    zp += w * v;
                }
                theta_load = [0.0, nu_f * zc, -nu_f * zp];
            }
            Target::Delta(x) => {
                iv.check(x)?;
                if !(self.spot > 0.0) {
                    return Err(IcosError::InvalidInput(format!(
                        "spot must be positive, got {}",
                        self.spot
                    )));
                }
                let h = basis::h_call_row(d.sine_terms, x, &iv);
                for m in 1..d.sine_terms {
                    b_load[m] = -iv.u(m) * h[m] / self.spot;
                }
                c_beta_load = 1.0 / self.spot;
                theta_load = [0.0, -iv.beta / self.spot, 0.0];
            }
            Target::D(m) => {
                if m > terms {
                    return Err(IcosError::InvalidInput(format!(
                        "coefficient index {m} beyond N = {terms}"
                    )));
                }
                d_load[m] = 1.0;
            }
            Target::A(m) => {
                if m > terms {
                    return Err(IcosError::InvalidInput(format!(
                        "coefficient index {m} beyond N = {terms}"
                    )));
                }
                let g = self.growth();
                d_load[m] = g;
                theta_load = [0.0, g * alt_sign(m), -g];
            }
        }

        Ok(Probe {
            target,
            d_load,
            b_load,
            c_beta_load,
            p_alpha_load,
            theta_load,
            weights: Vec::new(),
        })
    }

    /// Per-strike weights of the centred estimator.
    fn probe_weights(&self, p: &Probe) -> Vec<f64> {
        let d = &self.design;
        let iv = d.interval();
        let (d_load, b_load, theta_load) = (&p.d_load, &p.b_load, &p.theta_load);
        let n = d.n();
        let mut weights = vec![0.0; n];
        for (j, wj) in weights.iter_mut().enumerate() {
            let mut s = 0.0;
            for (m, l) in d_load.iter().enumerate().skip(1) {
                if *l != 0.0 {
                    s += l * d.psi[(j, m)];
                }
            }
            for (m, l) in b_load.iter().enumerate().skip(1) {
                if *l != 0.0 {
                    s += l * d.psi_tilde[(j, m)];
                }
            }
            *wj = d.omega[j] * s;
            for k in 0..3 {
                if theta_load[k] != 0.0 {
                    *wj += theta_load[k] * d.theta_loadings[(k, j)];
                }
            }
        }
        let mut edge_hi = p.c_beta_load;
        let mut edge_lo = p.p_alpha_load;
        for (m, l) in b_load.iter().enumerate().skip(1) {
            let u = iv.u(m);
            edge_hi -= l * u / iv.beta * alt_sign(m);
            edge_lo += l * u / iv.alpha;
        }
        weights[n - 1] += edge_hi;
        weights[0] += edge_lo;
        weights
    }

    pub fn value(&self, probe: &Probe) -> f64 {
        let mut v: f64 = probe
            .d_load
            .iter()
            .zip(&self.d_hat)
            .map(|(l, d)| l * d)
            .sum();
        v += probe
            .b_load
            .iter()
            .zip(&self.b_hat)
            .map(|(l, b)| l * b)
            .sum::<f64>();
        v += probe.c_beta_load * self.c_beta + probe.p_alpha_load * self.p_alpha;
        v += probe
            .theta_load
            .iter()
            .zip(&self.theta)
            .map(|(l, t)| l * t)
            .sum::<f64>();
        v
    }

    pub fn variance(&self, probe: &Probe) -> f64 {
        self.covariance.quadratic(&probe.weights)
    }

    pub fn evaluate(&self, probe: &Probe) -> EstimateWithCI {
        EstimateWithCI::new(self.value(probe), self.variance(probe).sqrt(), self.z_crit)
    }

    pub fn estimate(&self, target: Target) -> Result<EstimateWithCI> {
        Ok(self.evaluate(&self.probe(target)?))
    }

    pub fn price_call(&self, x: f64) -> Result<EstimateWithCI> {
        self.estimate(Target::Call(x))
    }

    pub fn price_put(&self, x: f64) -> Result<EstimateWithCI> {
        self.estimate(Target::Put(x))
    }

    /// Density of `log S_T` at `y`.
    pub fn rnd(&self, y: f64) -> Result<EstimateWithCI> {
        self.estimate(Target::Rnd(y))
    }

    /// Density of `S_T` at `s`.
    pub fn rnd_s(&self, s: f64) -> Result<EstimateWithCI> {
        self.estimate(Target::RndPrice(s))
    }

    pub fn delta_call(&self, x: f64) -> Result<EstimateWithCI> {
        self.estimate(Target::Delta(x))
    }

    /// `Â_0 ..= Â_N` with their standard errors.
    pub fn a_coeffs(&self) -> Result<Vec<EstimateWithCI>> {
        (0..=self.terms())
            .map(|m| self.estimate(Target::A(m)))
            .collect()
    }
}
