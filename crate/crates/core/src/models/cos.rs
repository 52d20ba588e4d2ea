//! Parametric COS pricing from a characteristic function.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::CharFn;
use crate::market::Right;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosPricer {
    pub terms: usize,
    /// Truncation half-width in units of `√T`.
    pub half_width: f64,
}

impl Default for CosPricer {
    fn default() -> Self {
        Self {
            terms: 1024,
            half_width: 4.0,
        }
    }
}

/// Projection helpers on `[a, b]` with `u_k = kπ/(b−a)`.
fn chi(u: f64, a: f64, c: f64, d: f64) -> f64 {
    let (sd, cd) = (u * (d - a)).sin_cos();
    let (sc, cc) = (u * (c - a)).sin_cos();
    (cd * d.exp() - cc * c.exp() + u * sd * d.exp() - u * sc * c.exp()) / (1.0 + u * u)
}

fn psi(k: usize, u: f64, a: f64, c: f64, d: f64) -> f64 {
    if k == 0 {
        d - c
    } else {
        ((u * (d - a)).sin() - (u * (c - a)).sin()) / u
    }
}

/// Precomputed `φ_{log S_T}(u_k)` on a range of fixed width.
struct Frame {
    width: f64,
    phi: Vec<Complex64>,
}

impl CosPricer {
    fn frame(&self, model: &dyn CharFn) -> Frame {
        let width = 2.0 * self.half_width * model.maturity().sqrt();
        let phi = (0..self.terms)
            .map(|k| model.cf(k as f64 * PI / width))
            .collect();
        Frame { width, phi }
    }

    /// Price-space range `[a, b]` for `y = log(S_T/K)`.
    fn range(&self, model: &dyn CharFn, k: f64) -> (f64, f64) {
        let c1 = model.log_mean() - k.ln();
        let h = self.half_width * model.maturity().sqrt();
        (c1 - h, c1 + h)
    }

    fn series(
        &self,
        model: &dyn CharFn,
        fr: &Frame,
        k: f64,
        right: Right,
        spot_deriv: bool,
    ) -> f64 {
        let (a, b) = self.range(model, k);
        let lk = k.ln();
        let mut sum = 0.0;
        for (m, phi) in fr.phi.iter().enumerate() {
            let u = m as f64 * PI / fr.width;
            let v = match right {
                Right::Call => {
                    let lo = a.max(0.0);
                    if lo >= b {
                        0.0
                    } else {
                        chi(u, a, lo, b) - psi(m, u, a, lo, b)
                    }
                }
                Right::Put => {
                    let hi = b.min(0.0);
                    if hi <= a {
                        0.0
                    } else {
                        psi(m, u, a, a, hi) - chi(u, a, a, hi)
                    }
                }
            };
            let mut coef = phi * Complex64::new(0.0, -u * (lk + a)).exp();
            if spot_deriv {
                coef *= Complex64::new(0.0, u / model.spot());
            }
            let term = coef.re * v;
            sum += if m == 0 { 0.5 * term } else { term };
        }
        (-model.rate() * model.maturity()).exp() * 2.0 / (b - a) * k * sum
    }

    pub fn price(&self, model: &dyn CharFn, k: f64, right: Right) -> f64 {
        let fr = self.frame(model);
        self.series(model, &fr, k, right, false)
    }

    /// Prices for many strikes sharing one set of characteristic-function values.
    pub fn prices(&self, model: &dyn CharFn, strikes: &[f64], right: Right) -> Vec<f64> {
        let fr = self.frame(model);
        strikes
            .iter()
            .map(|&k| self.series(model, &fr, k, right, false))
            .collect()
    }

    /// Out-of-the-money prices relative to `forward`.
    pub fn otm_prices(&self, model: &dyn CharFn, strikes: &[f64], forward: f64) -> Vec<f64> {
        let fr = self.frame(model);
        strikes
            .iter()
            .map(|&k| {
                let right = if k <= forward {
                    Right::Put
                } else {
                    Right::Call
                };
                self.series(model, &fr, k, right, false)
            })
            .collect()
    }

    /// Call delta `∂C/∂S_0`, holding the truncation range fixed.
    pub fn delta_call(&self, model: &dyn CharFn, k: f64) -> f64 {
        let fr = self.frame(model);
        self.series(model, &fr, k, Right::Call, true)
    }

    pub fn deltas_call(&self, model: &dyn CharFn, strikes: &[f64]) -> Vec<f64> {
        let fr = self.frame(model);
        strikes
            .iter()
            .map(|&k| self.series(model, &fr, k, Right::Call, true))
            .collect()
    }

    /// Density of `log S_T` at `z`.
    pub fn density_log(&self, model: &dyn CharFn, z: f64) -> f64 {
        let fr = self.frame(model);
        let a = model.log_mean() - self.half_width * model.maturity().sqrt();
        let mut sum = 0.0;
        for (m, phi) in fr.phi.iter().enumerate() {
            let u = m as f64 * PI / fr.width;
            let am = (phi * Complex64::new(0.0, -u * a).exp()).re;
            let term = am * (u * (z - a)).cos();
            sum += if m == 0 { 0.5 * term } else { term };
        }
        2.0 / fr.width * sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::svcj::{SvcjModel, SvcjParams};
    use crate::models::BsModel;

    #[test]
    fn matches_black_scholes_closed_form() {
        let pricer = CosPricer::default();
        for t in [30.0 / 365.0, 1.0] {
            let m = BsModel::new(4000.0, 0.0, 0.3, t).unwrap();
            for j in 0..=25 {
                let k = 4000.0 * (0.85 + 0.01 * j as f64);
                let c = pricer.price(&m, k, Right::Call);
                let p = pricer.price(&m, k, Right::Put);
                assert!(
                    (c - m.call(k)).abs() < 1e-6,
                    "t={t} k={k}: {c} vs {}",
                    m.call(k)
                );
                assert!((p - m.put(k)).abs() < 1e-6);
            }
            let d = pricer.delta_call(&m, 4000.0);
            assert!((d - m.delta_call(4000.0)).abs() < 1e-6);
            let y = 3900f64.ln();
            assert!((pricer.density_log(&m, y) - m.rnd_log(y)).abs() < 1e-6);
        }
    }

    fn svcj30() -> SvcjModel {
        SvcjModel::new(SvcjParams::default(), 4000.0, 0.0, 30.0 / 365.0).unwrap()
    }

    #[test]
    fn svcj_printed_truths() {
        let pricer = CosPricer::default();
        let m = svcj30();
        let ks = [3440.0, 3600.0, 3800.0, 4000.0, 4200.0, 4360.0];
        let c = pricer.prices(&m, &ks, Right::Call);
        let expect_c = [560.66, 402.23, 210.81, 54.13, 0.61, 0.14];
        for (got, want) in c.iter().zip(expect_c) {
            assert!((got - want).abs() < 0.02, "{got} vs {want}");
        }
        let expect_f = [0.13, 0.49, 2.76, 11.37, 3.11, 0.03];
        for (k, want) in ks.iter().zip(expect_f) {
            let got = pricer.density_log(&m, k.ln());
            assert!((got - want).abs() < 0.02, "{k}: {got} vs {want}");
        }
        let expect_d = [0.9959, 0.9852, 0.9195, 0.5959, 0.0156, 0.0011];
        for (k, want) in ks.iter().zip(expect_d) {
            let got = pricer.delta_call(&m, *k);
            assert!((got - want).abs() < 0.02, "{k}: {got} vs {want}");
        }
    }

    #[test]
    fn svcj_parity_delta_and_convexity() {
        let pricer = CosPricer::default();
        let m = SvcjModel::new(SvcjParams::default(), 4000.0, 0.01, 30.0 / 365.0).unwrap();
        let df = (-0.01f64 * m.t).exp();
        for k in [3500.0, 4000.0, 4300.0] {
            let c = pricer.price(&m, k, Right::Call);
            let p = pricer.price(&m, k, Right::Put);
            assert!((c - p - (m.s0 - k * df)).abs() < 1e-6);
            let h = 0.01;
            let up = SvcjModel { s0: m.s0 + h, ..m };
            let dn = SvcjModel { s0: m.s0 - h, ..m };
            // bump the spot with the range frozen at the unbumped model's centre
            let fd = (shifted(&pricer, &up, &m, k) - shifted(&pricer, &dn, &m, k)) / (2.0 * h);
            assert!((fd - pricer.delta_call(&m, k)).abs() < 1e-6);
        }
        let ks: Vec<f64> = (0..=200).map(|i| 3400.0 + 5.0 * i as f64).collect();
        let c = pricer.prices(&m, &ks, Right::Call);
        for w in c.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] > -1e-9);
        }
    }

    struct Frozen<'a> {
        inner: &'a SvcjModel,
        centre: f64,
    }

    impl CharFn for Frozen<'_> {
        fn cf(&self, u: f64) -> Complex64 {
            self.inner.cf(u)
        }
        fn log_mean(&self) -> f64 {
            self.centre
        }
        fn spot(&self) -> f64 {
            self.inner.s0
        }
        fn rate(&self) -> f64 {
            self.inner.r
        }
        fn maturity(&self) -> f64 {
            self.inner.t
        }
    }

    fn shifted(p: &CosPricer, bumped: &SvcjModel, base: &SvcjModel, k: f64) -> f64 {
        // the delta series holds a = log_mean − log K − h fixed
        let f = Frozen {
            inner: bumped,
            centre: base.log_mean(),
        };
        p.price(&f, k, Right::Call)
    }
}
