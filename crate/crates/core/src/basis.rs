//! Deterministic cosine-basis quantities on a fixed interval `[α, β]`.
//!
//! Everything here depends only on the interval, the frequency index and the
//! evaluation point, never on option prices.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{IcosError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub alpha: f64,
    pub beta: f64,
}

impl Interval {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > alpha && beta.is_finite()) {
            return Err(IcosError::InvalidInput(format!(
                "interval needs 0 < alpha < beta, got [{alpha}, {beta}]"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `L = log(β/α)`.
    pub fn width(&self) -> f64 {
        (self.beta / self.alpha).ln()
    }

    pub fn a(&self, x: f64) -> f64 {
        (self.alpha / x).ln()
    }

    pub fn b(&self, x: f64) -> f64 {
        (self.beta / x).ln()
    }

    /// `u_m = mπ/L`.
    pub fn u(&self, m: usize) -> f64 {
        m as f64 * PI / self.width()
    }

    pub fn check(&self, x: f64) -> Result<()> {
        // one part in 1e12 of slack so grid endpoints built by arithmetic pass
        let tol = 1e-12 * self.beta;
        if x.is_finite() && x >= self.alpha - tol && x <= self.beta + tol {
            Ok(())
        } else {
            Err(IcosError::OutOfInterval {
                point: x,
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    pub fn check_log(&self, y: f64) -> Result<()> {
        let (la, lb) = (self.alpha.ln(), self.beta.ln());
        if y.is_finite() && y >= la - 1e-12 && y <= lb + 1e-12 {
            Ok(())
        } else {
            Err(IcosError::OutOfInterval {
                point: y,
                alpha: la,
                beta: lb,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineBasis {
    pub interval: Interval,
    pub terms: usize,
    pub u: Vec<f64>,
}

impl CosineBasis {
    pub fn new(interval: Interval, terms: usize) -> Self {
        let u = (0..terms).map(|m| interval.u(m)).collect();
        Self { interval, terms, u }
    }
}

#[inline]
fn sign(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn positive(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(IcosError::InvalidInput(format!(
            "evaluation point must be positive, got {s}"
        )))
    }
}

/// Second strike-derivative of `cos(u_m log(s/α))`, with `u = u_m`.
#[inline]
pub fn psi_u(u: f64, s: f64, alpha: f64) -> f64 {
    let th = u * (s / alpha).ln();
    let (sn, cs) = th.sin_cos();
    u / (s * s) * (sn - u * cs)
}

/// Second strike-derivative of `sin(u_m log(s/α))`.
#[inline]
pub fn psi_tilde_u(u: f64, s: f64, alpha: f64) -> f64 {
    let th = u * (s / alpha).ln();
    let (sn, cs) = th.sin_cos();
    -u / (s * s) * (cs + u * sn)
}

pub fn psi(m: usize, s: f64, iv: &Interval) -> Result<f64> {
    positive(s)?;
    Ok(psi_u(iv.u(m), s, iv.alpha))
}

pub fn psi_tilde(m: usize, s: f64, iv: &Interval) -> Result<f64> {
    positive(s)?;
    Ok(psi_tilde_u(iv.u(m), s, iv.alpha))
}

/// Cosine coefficient of the call payoff `x·max(e^y − 1, 0)` on `[a(x), b(x)]`.
#[inline]
pub fn h_call_u(m: usize, u: f64, x: f64, iv: &Interval) -> f64 {
    let l = iv.width();
    if m == 0 {
        return 2.0 / l * (iv.beta - x - x * (iv.beta / x).ln());
    }
    let (sn, cs) = (u * iv.a(x)).sin_cos();
    2.0 * x / (u * (1.0 + u * u) * l) * (sign(m) * u * iv.beta / x - u * cs - sn)
}

/// Cosine coefficient of the put payoff `x·max(1 − e^y, 0)` on `[a(x), b(x)]`.
#[inline]
pub fn h_put_u(m: usize, u: f64, x: f64, iv: &Interval) -> f64 {
    let l = iv.width();
    if m == 0 {
        return 2.0 / l * (iv.alpha - x - x * (iv.alpha / x).ln());
    }
    let (sn, cs) = (u * iv.a(x)).sin_cos();
    2.0 * x / l * (-sn / u - (cs - iv.alpha / x - u * sn) / (1.0 + u * u))
}

pub fn h_call(m: usize, x: f64, iv: &Interval) -> Result<f64> {
    iv.check(x)?;
    Ok(h_call_u(m, iv.u(m), x, iv))
}

pub fn h_put(m: usize, x: f64, iv: &Interval) -> Result<f64> {
    iv.check(x)?;
    Ok(h_put_u(m, iv.u(m), x, iv))
}

/// `H_0 .. H_{terms-1}` at `x`.
pub fn h_call_row(terms: usize, x: f64, iv: &Interval) -> Vec<f64> {
    (0..terms).map(|m| h_call_u(m, iv.u(m), x, iv)).collect()
}

pub fn h_put_row(terms: usize, x: f64, iv: &Interval) -> Vec<f64> {
    (0..terms).map(|m| h_put_u(m, iv.u(m), x, iv)).collect()
}

/// `Σ′_{m<N} c_m v_m` with the m = 0 term halved.
#[inline]
pub fn primed_sum(coeffs: impl Iterator<Item = f64>) -> f64 {
    coeffs
        .enumerate()
        .map(|(m, v)| if m == 0 { 0.5 * v } else { v })
        .sum()
}

/// `(Z_c^N(x), Z_p^N(x))` for the call representation.
pub fn z_terms(terms: usize, x: f64, iv: &Interval) -> Result<(f64, f64)> {
    iv.check(x)?;
    let h = h_call_row(terms, x, iv);
    Ok(z_from_row(&h, x, iv))
}

pub(crate) fn z_from_row(h: &[f64], x: f64, iv: &Interval) -> (f64, f64) {
    let zc = x - iv.beta + primed_sum(h.iter().enumerate().map(|(m, v)| sign(m) * v));
    let zp = -primed_sum(h.iter().copied());
    (zc, zp)
}

/// `(Z^p_c(x), Z^p_p(x))` for the put representation.
pub fn z_terms_put(terms: usize, x: f64, iv: &Interval) -> Result<(f64, f64)> {
    iv.check(x)?;
    let h = h_put_row(terms, x, iv);
    Ok(z_put_from_row(&h, x, iv))
}

pub(crate) fn z_put_from_row(h: &[f64], x: f64, iv: &Interval) -> (f64, f64) {
    let zc = primed_sum(h.iter().enumerate().map(|(m, v)| sign(m) * v));
    let zp = x - iv.alpha - primed_sum(h.iter().copied());
    (zc, zp)
}

/// `cos(u_m (y − log α))` for m < terms.
pub fn h_density_row(terms: usize, y: f64, iv: &Interval) -> Vec<f64> {
    let la = iv.alpha.ln();
    (0..terms).map(|m| (iv.u(m) * (y - la)).cos()).collect()
}

/// `(Σ′(−1)^m H^f_m(y), Σ′H^f_m(y))`.
pub fn z_terms_f(terms: usize, y: f64, iv: &Interval) -> Result<(f64, f64)> {
    iv.check_log(y)?;
    let h = h_density_row(terms, y, iv);
    Ok((
        primed_sum(h.iter().enumerate().map(|(m, v)| sign(m) * v)),
        primed_sum(h.iter().copied()),
    ))
}

/// `(Z̃_c^N(x), Z̃_p^N(x))` for the delta representation.
pub fn z_terms_delta(terms: usize, x: f64, iv: &Interval) -> Result<(f64, f64)> {
    iv.check(x)?;
    let h = h_call_row(terms, x, iv);
    Ok(z_delta_from_row(&h, iv))
}

pub(crate) fn z_delta_from_row(h: &[f64], iv: &Interval) -> (f64, f64) {
    let mut zc = 1.0;
    let mut zp = 0.0;
    for (m, hm) in h.iter().enumerate().skip(1) {
        let u2 = iv.u(m).powi(2);
        zc += u2 / iv.beta * sign(m) * hm;
        zp -= u2 / iv.alpha * hm;
    }
    (zc, zp)
}

pub(crate) fn alt_sign(m: usize) -> f64 {
    sign(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spx() -> Interval {
        Interval::new(3400.0, 4400.0).unwrap()
    }

    /// `(2/L) ∫_lo^hi g(y) cos(u(y − a)) dy` by composite Simpson on `nodes` intervals.
    fn project(
        g: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        u: f64,
        a: f64,
        l: f64,
        nodes: usize,
    ) -> f64 {
        let n = nodes + nodes % 2;
        let h = (hi - lo) / n as f64;
        let f = |y: f64| g(y) * (u * (y - a)).cos();
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let y = lo + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        2.0 / l * s * h / 3.0
    }

    #[test]
    fn psi_special_values() {
        let iv = spx();
        assert_eq!(psi(0, 3900.0, &iv).unwrap(), 0.0);
        assert_eq!(psi_tilde(0, 3900.0, &iv).unwrap(), 0.0);
        let u1 = iv.u(1);
        let a2 = iv.alpha * iv.alpha;
        assert!((psi(1, iv.alpha, &iv).unwrap() + u1 * u1 / a2).abs() < 1e-18);
        assert!((psi_tilde(1, iv.alpha, &iv).unwrap() + u1 / a2).abs() < 1e-18);
        assert!(psi(1, 0.0, &iv).is_err());
    }

    fn fd2(f: impl Fn(f64) -> f64, s: f64) -> f64 {
        let h = 1e-4 * s;
        (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h)
    }

    #[test]
    fn psi_is_second_derivative_of_cosine() {
        let iv = spx();
        for m in 1..=20 {
            let u = iv.u(m);
            for j in 1..=10 {
                let s = iv.alpha + (iv.beta - iv.alpha) * j as f64 / 11.0;
                let fd = fd2(|k| (u * (k / iv.alpha).ln()).cos(), s);
                let an = psi(m, s, &iv).unwrap();
                let scale = u * u / (s * s);
                assert!((fd - an).abs() < 1e-4 * scale, "m={m} s={s}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn psi_tilde_is_second_derivative_of_sine() {
        let iv = spx();
        for m in [1, 5, 9, 20] {
            let u = iv.u(m);
            for j in 1..=10 {
                let s = iv.alpha + (iv.beta - iv.alpha) * j as f64 / 11.0;
                let fd = fd2(|k| (u * (k / iv.alpha).ln()).sin(), s);
                let an = psi_tilde(m, s, &iv).unwrap();
                let scale = u * u / (s * s);
                assert!((fd - an).abs() < 1e-4 * scale, "m={m}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn h_call_matches_brute_force_projection() {
        let iv = spx();
        let l = iv.width();
        for x in [3400.0, 3700.0, 4000.0, 4390.0] {
            let (a, b) = (iv.a(x), iv.b(x));
            for m in 0..=32 {
                let u = iv.u(m);
                let oracle = project(|y| x * (y.exp() - 1.0), 0.0, b, u, a, l, 200_000);
                let h = h_call(m, x, &iv).unwrap();
                assert!((h - oracle).abs() < 1e-8, "x={x} m={m}: {h} vs {oracle}");
            }
        }
    }

    #[test]
    fn h_put_matches_brute_force_projection() {
        let iv = spx();
        let l = iv.width();
        for x in [3410.0, 3700.0, 4000.0, 4400.0] {
            let a = iv.a(x);
            for m in 0..=32 {
                let u = iv.u(m);
                let oracle = project(|y| x * (1.0 - y.exp()), a, 0.0, u, a, l, 200_000);
                let h = h_put(m, x, &iv).unwrap();
                assert!((h - oracle).abs() < 1e-8, "x={x} m={m}: {h} vs {oracle}");
            }
        }
    }

    #[test]
    fn h_at_interval_edges() {
        let iv = spx();
        assert!(h_call(0, iv.beta, &iv).unwrap().abs() < 1e-12);
        for m in 0..10 {
            assert!(h_put(m, iv.alpha, &iv).unwrap().abs() < 1e-9);
        }
        assert!(h_call(3, 4500.0, &iv).is_err());
        assert!(h_put(3, 3000.0, &iv).is_err());
    }

    #[test]
    fn call_minus_put_is_forward_projection() {
        let iv = spx();
        let l = iv.width();
        let x = 3900.0;
        let (a, b) = (iv.a(x), iv.b(x));
        for m in 0..=12 {
            let oracle = project(|y| x * (y.exp() - 1.0), a, b, iv.u(m), a, l, 200_000);
            let diff = h_call(m, x, &iv).unwrap() - h_put(m, x, &iv).unwrap();
            assert!((diff - oracle).abs() < 1e-8);
        }
    }

    #[test]
    fn h_call_decays_quadratically() {
        let iv = spx();
        let x = 3950.0;
        let cmax = (20..=200)
            .map(|m| h_call(m, x, &iv).unwrap().abs() * (m * m) as f64)
            .fold(0.0, f64::max);
        let cmax_tail = (150..=200)
            .map(|m| h_call(m, x, &iv).unwrap().abs() * (m * m) as f64)
            .fold(0.0, f64::max);
        assert!(cmax.is_finite() && cmax_tail <= cmax * 1.01);
        // the bound is attained in order of magnitude, not just an overestimate
        assert!(cmax_tail > 0.1 * cmax);
        let psi_ratio = (150..=200)
            .map(|m| psi(m, x, &iv).unwrap().abs() / (m * m) as f64)
            .fold(0.0, f64::max);
        assert!(psi_ratio < 1.0);
    }

    #[test]
    fn z_single_term() {
        let iv = spx();
        let (_, zp) = z_terms(1, 3800.0, &iv).unwrap();
        assert!((zp + 0.5 * h_call(0, 3800.0, &iv).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn z_f_at_edges() {
        let iv = spx();
        for n in [1, 7, 14] {
            let (_, zp) = z_terms_f(n, iv.alpha.ln(), &iv).unwrap();
            assert!((zp - (n as f64 - 0.5)).abs() < 1e-12);
            let (zc, _) = z_terms_f(n, iv.beta.ln(), &iv).unwrap();
            assert!((zc - (n as f64 - 0.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn z_at_beta_matches_direct_sum() {
        let iv = spx();
        let (zc, _) = z_terms(14, iv.beta, &iv).unwrap();
        let mut direct = 0.0;
        for m in 0..14 {
            let w = if m == 0 { 0.5 } else { 1.0 };
            direct += w * (-1f64).powi(m as i32) * h_call(m, iv.beta, &iv).unwrap();
        }
        assert!((zc - direct).abs() < 1e-12);
    }

    #[test]
    fn z_delta_matches_independent_recomputation() {
        let iv = spx();
        let x = 3777.0;
        let n = 25;
        let (zc, zp) = z_terms_delta(n, x, &iv).unwrap();
        let l = (iv.beta / iv.alpha).ln();
        let (mut c, mut p) = (1.0, 0.0);
        for m in 1..n {
            let u = m as f64 * std::f64::consts::PI / l;
            let h = h_call(m, x, &iv).unwrap();
            c += u * u / iv.beta * (-1f64).powi(m as i32) * h;
            p -= u * u / iv.alpha * h;
        }
        assert!((zc - c).abs() < 1e-12 && (zp - p).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn basis_u_is_increasing(alpha in 1.0f64..1e4, ratio in 1.01f64..3.0, terms in 2usize..64) {
            let b = CosineBasis::new(Interval::new(alpha, alpha * ratio).unwrap(), terms);
            prop_assert_eq!(b.u[0], 0.0);
            prop_assert!(b.u.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn parity_of_payoff_coefficients(frac in 0.0f64..1.0, m in 0usize..32) {
            // H_call − H_put equals the analytic projection of x(e^y − 1)
            let iv = spx();
            let x = iv.alpha + frac * (iv.beta - iv.alpha);
            let (a, b, l) = (iv.a(x), iv.b(x), iv.width());
            let u = iv.u(m);
            let fwd = if m == 0 {
                2.0 / l * x * (b.exp() - a.exp() - (b - a))
            } else {
                // ∫ e^y cos(u(y−a)) dy on [a,b] with u(b−a)=mπ
                let e = ((-1f64).powi(m as i32) * b.exp() - a.exp()) / (1.0 + u * u);
                2.0 / l * x * e
            };
            let diff = h_call(m, x, &iv).unwrap() - h_put(m, x, &iv).unwrap();
            prop_assert!((diff - fwd).abs() < 1e-8 * (1.0 + fwd.abs()));
        }
    }
}
