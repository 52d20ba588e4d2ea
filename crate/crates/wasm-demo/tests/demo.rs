use icos_wasm_demo::{fixture, order, price, rnd};
use serde_json::Value;

#[test]
fn fixtures_round_trip_through_csv() {
    for name in ["bs30", "svcj30", "spx-noisy", "bimodal"] {
        let csv = fixture(name).unwrap();
        assert!(csv.starts_with("expiry_days,rate,forward,strike,right,bid,ask"));
    }
    assert!(fixture("nope").is_err());
}

#[test]
fn rnd_curve_has_bands_around_estimate() {
    let csv = fixture("bs30").unwrap();
    let v: Value = serde_json::from_str(&rnd(&csv, 14, 41, 0.95).unwrap()).unwrap();
    assert_eq!(v["terms"], 14);
    let x = v["x"].as_array().unwrap();
    assert_eq!(x.len(), 41);
    for i in 0..41 {
        let (lo, mid, hi) = (
            v["lower"][i].as_f64().unwrap(),
            v["value"][i].as_f64().unwrap(),
            v["upper"][i].as_f64().unwrap(),
        );
        assert!(lo <= mid && mid <= hi);
    }
}

#[test]
fn price_matches_bs_fixture() {
    let csv = fixture("bs30").unwrap();
    let v: Value = serde_json::from_str(&price(&csv, 14, 4000.0, true, 0.95).unwrap()).unwrap();
    let e = v["estimate"]["value"].as_f64().unwrap();
    assert!((e - 137.21).abs() < 0.01, "{e}");
}

#[test]
fn order_trace_reports_selection() {
    let csv = fixture("bimodal").unwrap();
    let v: Value = serde_json::from_str(&order(&csv).unwrap()).unwrap();
    assert!(v["n_star"].as_u64().unwrap() >= 5);
    assert!(!v["trace"].as_array().unwrap().is_empty());
}

#[test]
fn bad_csv_is_an_error() {
    assert!(rnd("not,a,chain\n", 0, 10, 0.95).is_err());
}
