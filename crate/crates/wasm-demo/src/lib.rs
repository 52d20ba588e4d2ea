//! Browser bindings for the estimator. Every export takes a chain as CSV text
//! (the same format the CLI reads) and returns JSON.

use icos::fixtures;
use icos::market::{read_chain, write_chain, IngestConfig};
use icos::order::{optimal_n, DEFAULT_MAX_TERMS, DEFAULT_MIN_TERMS};
use icos::{FitConfig, IcosFit, OptionChain, Scheme, Target};
use serde_json::json;
use wasm_bindgen::prelude::*;

type Res<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn fixture(name: &str) -> Res<String> {
    let strikes = fixtures::mc_strikes();
    let chain = match name {
        "bs30" => fixtures::bs_chain(0.3, 30.0, &strikes).map_err(err)?.1,
        "svcj30" => {
            fixtures::svcj_chain(Default::default(), 30.0, &strikes)
                .map_err(err)?
                .1
        }
        "spx-noisy" => fixtures::spx_like_noisy_chain(42).map_err(err)?,
        "bimodal" => fixtures::bimodal_chain().map_err(err)?.1,
        other => return Err(format!("unknown fixture `{other}`")),
    };
    let mut buf = Vec::new();
    write_chain(&mut buf, &chain).map_err(err)?;
    String::from_utf8(buf).map_err(err)
}

fn parse(csv: &str) -> Res<OptionChain> {
    read_chain(csv.as_bytes(), &IngestConfig::default()).map_err(err)
}

/// Zero terms means "let the order rule choose".
fn fit(chain: &OptionChain, terms: usize, conf: f64) -> Res<IcosFit> {
    let terms = match terms {
        0 => {
            optimal_n(
                chain,
                Scheme::default(),
                DEFAULT_MIN_TERMS,
                DEFAULT_MAX_TERMS,
            )
            .map_err(err)?
            .n_star
        }
        n => n,
    };
    let mut cfg = FitConfig::new(terms);
    cfg.conf = conf;
    IcosFit::new(chain, &cfg).map_err(err)
}

/// Density of the terminal price on a uniform grid across the strike range.
pub fn rnd(csv: &str, terms: usize, points: usize, conf: f64) -> Res<String> {
    let chain = parse(csv)?;
    let fit = fit(&chain, terms, conf)?;
    let iv = fit.interval();
    let points = points.max(2);
    let mut x = Vec::with_capacity(points);
    let (mut value, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..points {
        let s = iv.alpha + (iv.beta - iv.alpha) * i as f64 / (points - 1) as f64;
        let e = fit.estimate(Target::RndPrice(s)).map_err(err)?;
        x.push(s);
        value.push(e.value);
        lower.push(e.lower);
        upper.push(e.upper);
    }
    let out = json!({
        "terms": fit.d_hat().len(),
        "forward": chain.forward,
        "interval": [iv.alpha, iv.beta],
        "x": x, "value": value, "lower": lower, "upper": upper,
    });
    Ok(out.to_string())
}

pub fn price(csv: &str, terms: usize, strike: f64, call: bool, conf: f64) -> Res<String> {
    let chain = parse(csv)?;
    let fit = fit(&chain, terms, conf)?;
    let target = if call {
        Target::Call(strike)
    } else {
        Target::Put(strike)
    };
    let e = fit.estimate(target).map_err(err)?;
    Ok(json!({ "terms": fit.d_hat().len(), "strike": strike, "estimate": e }).to_string())
}

pub fn order(csv: &str) -> Res<String> {
    let chain = parse(csv)?;
    let sel = optimal_n(
        &chain,
        Scheme::default(),
        DEFAULT_MIN_TERMS,
        DEFAULT_MAX_TERMS,
    )
    .map_err(err)?;
    serde_json::to_string(&sel).map_err(err)
}

fn js<T>(r: Res<T>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fixtureCsv)]
pub fn fixture_csv(name: &str) -> Result<String, JsValue> {
    js(fixture(name))
}

#[wasm_bindgen(js_name = rndCurve)]
pub fn rnd_curve(csv: &str, terms: usize, points: usize, conf: f64) -> Result<String, JsValue> {
    js(rnd(csv, terms, points, conf))
}

#[wasm_bindgen(js_name = priceAt)]
pub fn price_at(
    csv: &str,
    terms: usize,
    strike: f64,
    call: bool,
    conf: f64,
) -> Result<String, JsValue> {
    js(price(csv, terms, strike, call, conf))
}

#[wasm_bindgen(js_name = orderTrace)]
pub fn order_trace(csv: &str) -> Result<String, JsValue> {
    js(order(csv))
}
