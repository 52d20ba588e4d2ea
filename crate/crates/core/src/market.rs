//! Option chains for a single expiry: ingest, validation, forwards and implied vols.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::basis::Interval;
use crate::error::{IcosError, Result};
use crate::models::black_scholes::{black_price, black_vega};
pub use crate::quadrature::GridKind;

pub const MIN_STRIKES: usize = 5;
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Right {
    #[serde(rename = "C")]
    Call,
    #[serde(rename = "P")]
    Put,
}

impl std::str::FromStr for Right {
    type Err = IcosError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "C" | "c" | "call" => Ok(Right::Call),
            "P" | "p" | "put" => Ok(Right::Put),
            other => Err(IcosError::Parse(format!("unknown option right '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    pub right: Right,
}

impl OptionQuote {
    pub fn new(strike: f64, bid: f64, ask: f64, right: Right) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(IcosError::InvalidInput(format!(
                "strike must be positive, got {strike}"
            )));
        }
        if !(bid >= 0.0 && ask >= bid && ask.is_finite()) {
            return Err(IcosError::InvalidInput(format!(
                "quote at {strike} needs ask >= bid >= 0, got bid {bid} ask {ask}"
            )));
        }
        Ok(Self {
            strike,
            bid,
            ask,
            right,
        })
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }
}

/// One expiry's OTM prices on `[α, β] = [K_1, K_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub expiry_days: f64,
    pub rate: f64,
    pub forward: f64,
    pub strikes: Vec<f64>,
    pub otm_prices: Vec<f64>,
}

impl OptionChain {
    pub fn new(
        expiry_days: f64,
        rate: f64,
        forward: f64,
        strikes: Vec<f64>,
        otm_prices: Vec<f64>,
    ) -> Result<Self> {
        if let Some(p) = otm_prices.iter().find(|p| !(**p >= 0.0)) {
            return Err(IcosError::InvalidInput(format!(
                "negative or missing OTM price {p}"
            )));
        }
        Self::new_unsigned(expiry_days, rate, forward, strikes, otm_prices)
    }

    /// Same checks as [`OptionChain::new`] except the price sign, for noisy
    /// synthetic quotes that may dip below zero.
    pub fn new_unsigned(
        expiry_days: f64,
        rate: f64,
        forward: f64,
        strikes: Vec<f64>,
        otm_prices: Vec<f64>,
    ) -> Result<Self> {
        if !(expiry_days > 0.0 && expiry_days.is_finite()) {
            return Err(IcosError::InvalidInput(format!(
                "expiry must be positive, got {expiry_days} days"
            )));
        }
        if !rate.is_finite() {
            return Err(IcosError::InvalidInput("rate must be finite".into()));
        }
        if strikes.len() != otm_prices.len() {
            return Err(IcosError::LengthMismatch {
                expected: strikes.len(),
                found: otm_prices.len(),
            });
        }
        if strikes.len() < MIN_STRIKES {
            return Err(IcosError::TooFewStrikes {
                found: strikes.len(),
                required: MIN_STRIKES,
            });
        }
        if strikes[0] <= 0.0 || strikes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IcosError::InvalidInput(
                "strikes must be positive and strictly ascending".into(),
            ));
        }
        if otm_prices.iter().any(|p| !p.is_finite()) {
            return Err(IcosError::InvalidInput("non-finite OTM price".into()));
        }
        let (alpha, beta) = (strikes[0], strikes[strikes.len() - 1]);
        if !(forward >= alpha && forward <= beta) {
            return Err(IcosError::InvalidInput(format!(
                "forward {forward} outside the strike range [{alpha}, {beta}]"
            )));
        }
        Ok(Self {
            expiry_days,
            rate,
            forward,
            strikes,
            otm_prices,
        })
    }

    /// Copy of the chain with replaced OTM prices (sign unchecked).
    pub fn with_prices(&self, otm_prices: Vec<f64>) -> Result<Self> {
        Self::new_unsigned(
            self.expiry_days,
            self.rate,
            self.forward,
            self.strikes.clone(),
            otm_prices,
        )
    }

    pub fn maturity(&self) -> f64 {
        self.expiry_days / DAYS_PER_YEAR
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity()).exp()
    }

    /// Spot implied by the forward, `F e^{−rT}`.
    pub fn spot(&self) -> f64 {
        self.forward * self.discount()
    }

    pub fn interval(&self) -> Interval {
        Interval {
            alpha: self.strikes[0],
            beta: self.strikes[self.len() - 1],
        }
    }

    pub fn grid(&self) -> Result<GridKind> {
        GridKind::classify(&self.strikes)
    }

    pub fn right_at(&self, k: f64) -> Right {
        if k <= self.forward {
            Right::Put
        } else {
            Right::Call
        }
    }

    /// Call prices at every strike, from parity where the stored quote is a put.
    pub fn call_prices(&self) -> Vec<f64> {
        let df = self.discount();
        self.strikes
            .iter()
            .zip(&self.otm_prices)
            .map(|(&k, &o)| match self.right_at(k) {
                Right::Put => o + df * (self.forward - k),
                Right::Call => o,
            })
            .collect()
    }

    pub fn call_at_beta(&self) -> f64 {
        *self.call_prices().last().unwrap()
    }

    /// Put price at `α`.
    pub fn put_at_alpha(&self) -> f64 {
        let k = self.strikes[0];
        let o = self.otm_prices[0];
        match self.right_at(k) {
            Right::Put => o,
            Right::Call => o - self.discount() * (self.forward - k),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Overrides both the file's forward column and parity inference.
    pub forward: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    expiry_days: f64,
    rate: f64,
    forward: Option<f64>,
    strike: f64,
    right: String,
    bid: f64,
    ask: f64,
}

pub fn load_chain(path: impl AsRef<Path>, config: &IngestConfig) -> Result<OptionChain> {
    let file = std::fs::File::open(path.as_ref())?;
    read_chain(file, config)
}

pub fn read_chain<R: Read>(reader: R, config: &IngestConfig) -> Result<OptionChain> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IcosError::Parse(e.to_string()))?
        .clone();
    let expected = [
        "expiry_days",
        "rate",
        "forward",
        "strike",
        "right",
        "bid",
        "ask",
    ];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(IcosError::Parse(format!(
            "expected header '{}', found '{}'",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut expiry = None;
    let mut rate = None;
    let mut forward = config.forward;
    let mut quotes = Vec::new();
    for (line, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| IcosError::Parse(format!("row {}: {e}", line + 2)))?;
        if row.bid < 0.0 || row.ask < 0.0 {
            return Err(IcosError::Parse(format!(
                "row {}: negative price (bid {}, ask {})",
                line + 2,
                row.bid,
                row.ask
            )));
        }
        match expiry {
            None => expiry = Some(row.expiry_days),
            Some(e) if e != row.expiry_days => {
                return Err(IcosError::Parse("chain mixes several expiries".into()))
            }
            _ => {}
        }
        match rate {
            None => rate = Some(row.rate),
            Some(r) if r != row.rate => {
                return Err(IcosError::Parse("chain mixes several rates".into()))
            }
            _ => {}
        }
        if forward.is_none() {
            forward = row.forward;
        }
        let right: Right = row.right.parse()?;
        let q = OptionQuote::new(row.strike, row.bid, row.ask, right)
            .map_err(|e| IcosError::Parse(format!("row {}: {e}", line + 2)))?;
        quotes.push(q);
    }
    let expiry = expiry.ok_or_else(|| IcosError::Parse("no rows".into()))?;
    chain_from_quotes(expiry, rate.unwrap_or(0.0), forward, &quotes)
}

/// Builds a chain from raw quotes: zero bids are dropped, the forward is
/// implied from parity when not given, and the OTM side is kept at each strike
/// (duplicate quotes are averaged).
pub fn chain_from_quotes(
    expiry_days: f64,
    rate: f64,
    forward: Option<f64>,
    quotes: &[OptionQuote],
) -> Result<OptionChain> {
    let quotes: Vec<OptionQuote> = quotes.iter().copied().filter(|q| q.bid > 0.0).collect();
    let t = expiry_days / DAYS_PER_YEAR;
    let forward = match forward {
        Some(f) => f,
        None => {
            let calls: Vec<OptionQuote> = quotes
                .iter()
                .copied()
                .filter(|q| q.right == Right::Call)
                .collect();
            let puts: Vec<OptionQuote> = quotes
                .iter()
                .copied()
                .filter(|q| q.right == Right::Put)
                .collect();
            imply_forward(&calls, &puts, rate, t)?
        }
    };

    let mut by_strike: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for q in &quotes {
        let wanted = if q.strike <= forward {
            Right::Put
        } else {
            Right::Call
        };
        if q.right != wanted {
            continue;
        }
        let e = by_strike
            .entry(q.strike.to_bits())
            .or_insert((q.strike, 0.0, 0));
        e.1 += q.mid();
        e.2 += 1;
    }
    let mut pairs: Vec<(f64, f64)> = by_strike
        .values()
        .map(|&(k, s, c)| (k, s / c as f64))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs.len() < MIN_STRIKES {
        return Err(IcosError::TooFewStrikes {
            found: pairs.len(),
            required: MIN_STRIKES,
        });
    }
    let (strikes, prices) = pairs.into_iter().unzip();
    OptionChain::new(expiry_days, rate, forward, strikes, prices)
}

/// Writes the chain as OTM quotes with `bid = ask = O(K)`, so reading it back is exact.
pub fn write_chain<W: Write>(writer: W, chain: &OptionChain) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (&k, &o) in chain.strikes.iter().zip(&chain.otm_prices) {
        let right = match chain.right_at(k) {
            Right::Call => "C",
            Right::Put => "P",
        };
        w.serialize(Row {
            expiry_days: chain.expiry_days,
            rate: chain.rate,
            forward: Some(chain.forward),
            strike: k,
            right: right.into(),
            bid: o,
            ask: o,
        })
        .map_err(|e| IcosError::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_chain(path: impl AsRef<Path>, chain: &OptionChain) -> Result<()> {
    write_chain(std::fs::File::create(path.as_ref())?, chain)
}

/// Forward from put-call parity at the strike where `|C − P|` is smallest
/// (ties go to the lowest strike).
pub fn imply_forward(calls: &[OptionQuote], puts: &[OptionQuote], r: f64, t: f64) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for c in calls {
        for p in puts.iter().filter(|p| p.strike == c.strike) {
            let diff = c.mid() - p.mid();
            let better = match best {
                None => true,
                Some((k, d)) => diff.abs() < d.abs() || (diff.abs() == d.abs() && c.strike < k),
            };
            if better {
                best = Some((c.strike, diff));
            }
        }
    }
    let (k, diff) = best.ok_or(IcosError::NoParityPair)?;
    Ok(k + (r * t).exp() * diff)
}

const VOL_LO: f64 = 1e-6;
const VOL_HI: f64 = 5.0;

/// Black-Scholes implied volatility by safeguarded Newton inside a bisection bracket.
pub fn implied_vol(
    price: f64,
    forward: f64,
    strike: f64,
    r: f64,
    t: f64,
    right: Right,
) -> Result<f64> {
    let df = (-r * t).exp();
    let lower = black_price(forward, strike, VOL_LO, df, t, right);
    let upper = black_price(forward, strike, VOL_HI, df, t, right);
    if !(price > lower && price < upper) {
        return Err(IcosError::PriceOutOfBounds {
            price,
            lower,
            upper,
        });
    }
    let (mut lo, mut hi) = (VOL_LO, VOL_HI);
    let mut sigma = (2.0 * std::f64::consts::PI / t).sqrt() * price / (df * forward);
    if !(sigma > lo && sigma < hi) {
        sigma = 0.3;
    }
    for _ in 0..200 {
        let diff = black_price(forward, strike, sigma, df, t, right) - price;
        if diff.abs() < 1e-12 * price.max(1.0) {
            return Ok(sigma);
        }
        if diff > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = black_vega(forward, strike, sigma, df, t);
        let newton = sigma - diff / vega;
        sigma = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            return Ok(sigma);
        }
    }
    Ok(sigma)
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(IcosError::LengthMismatch {
                expected: n,
                found: y.len(),
            });
        }
        if n < 3 {
            return Err(IcosError::TooFewStrikes {
                found: n,
                required: 3,
            });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        // tridiagonal system for the interior second derivatives (Thomas algorithm)
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            upper[i] = h[i + 1];
            rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        for i in (0..k).rev() {
            let next = if i + 1 < k { m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Default fine-grid size: four sub-intervals per original spacing, kept odd.
pub fn default_regrid_size(n: usize) -> usize {
    4 * (n - 1) + 1
}

/// Implied vol of every stored OTM price.
pub fn chain_implied_vols(chain: &OptionChain) -> Result<Vec<f64>> {
    let t = chain.maturity();
    chain
        .strikes
        .iter()
        .zip(&chain.otm_prices)
        .map(|(&k, &o)| implied_vol(o, chain.forward, k, chain.rate, t, chain.right_at(k)))
        .collect()
}

/// Spline the implied vols against log-strike and reprice on a uniform `m`-point grid.
pub fn spline_iv_regrid(chain: &OptionChain, m: usize) -> Result<OptionChain> {
    let n = chain.len();
    if n < 4 {
        return Err(IcosError::TooFewStrikes {
            found: n,
            required: 4,
        });
    }
    if m < n {
        return Err(IcosError::InvalidInput(format!(
            "regrid size {m} is smaller than the {n} observed strikes"
        )));
    }
    let iv = chain_implied_vols(chain)?;
    let logk: Vec<f64> = chain.strikes.iter().map(|k| k.ln()).collect();
    let spline = NaturalSpline::new(&logk, &iv)?;
    let Interval { alpha, beta } = chain.interval();
    let t = chain.maturity();
    let df = chain.discount();
    let mut strikes = Vec::with_capacity(m);
    let mut prices = Vec::with_capacity(m);
    for j in 0..m {
        let k = if j == m - 1 {
            beta
        } else {
            alpha + (beta - alpha) * j as f64 / (m - 1) as f64
        };
        let sigma = spline.eval(k.ln());
        strikes.push(k);
        prices.push(black_price(
            chain.forward,
            k,
            sigma,
            df,
            t,
            chain.right_at(k),
        ));
    }
    prices[0] = chain.otm_prices[0];
    prices[m - 1] = chain.otm_prices[n - 1];
    OptionChain::new_unsigned(
        chain.expiry_days,
        chain.rate,
        chain.forward,
        strikes,
        prices,
    )
}
