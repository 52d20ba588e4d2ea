use icos::fixtures::{
    bimodal_chain, bs_chain, mc_strikes, spx_like_chain, spx_like_quotes, SPX_FORWARD,
};
use icos::market::{chain_from_quotes, load_chain, save_chain, spline_iv_regrid, IngestConfig};
use icos::models::BsModel;
use icos::order::optimal_n;
use icos::{FitConfig, IcosFit, Right, Scheme, Target};

#[test]
fn csv_round_trip_refits_identically() {
    let (_, chain) = bs_chain(0.3, 30.0, &mc_strikes()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bs30.csv");
    save_chain(&path, &chain).unwrap();
    let back = load_chain(&path, &IngestConfig::default()).unwrap();
    assert_eq!(back, chain);
    let cfg = FitConfig::new(14);
    let a = IcosFit::new(&chain, &cfg).unwrap();
    let b = IcosFit::new(&back, &cfg).unwrap();
    assert_eq!(a.price_call(4000.0).unwrap(), b.price_call(4000.0).unwrap());
}

#[test]
fn printed_atm_call_with_interval() {
    let (m, chain) = bs_chain(0.3, 30.0, &mc_strikes()).unwrap();
    let est = IcosFit::new(&chain, &FitConfig::new(14))
        .unwrap()
        .price_call(4000.0)
        .unwrap();
    assert!((est.value - 137.21).abs() < 0.005);
    assert!(est.lower < est.value && est.value < est.upper);
    assert!((est.value - m.call(4000.0)).abs() < 1e-3);
}

#[test]
fn spx_like_ingest() {
    let chain = chain_from_quotes(29.0, 0.001, None, &spx_like_quotes(None).unwrap()).unwrap();
    assert_eq!(chain, spx_like_chain().unwrap());
    assert_eq!(chain.len(), 239);
    assert!((chain.forward - SPX_FORWARD).abs() < 1e-6);
    // non-uniform grid: the fit falls back to the trapezoid rule
    let fit = IcosFit::new(&chain, &FitConfig::new(20)).unwrap();
    let c = fit.price_call(4000.0).unwrap();
    let p = fit.price_put(4000.0).unwrap();
    let parity = (-0.001f64 * 29.0 / 365.0).exp() * (chain.forward - 4000.0);
    assert!((c.value - p.value - parity).abs() < 0.1);
}

#[test]
fn regrid_gives_decreasing_calls() {
    let chain = spx_like_chain().unwrap();
    let fine = spline_iv_regrid(&chain, 501).unwrap();
    assert_eq!(fine.len(), 501);
    assert!(fine.grid().unwrap().is_uniform());
    let calls = fine.call_prices();
    assert!(calls.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn regrid_reprices_black_scholes() {
    let (m, chain) = bs_chain(0.3, 30.0, &mc_strikes()).unwrap();
    let fine = spline_iv_regrid(&chain, 801).unwrap();
    for (&k, &o) in fine.strikes.iter().zip(&fine.otm_prices) {
        assert!((o - m.otm(k)).abs() < 1e-6, "{k}");
    }
}

fn local_maxima(xs: &[f64], f: &[f64]) -> Vec<f64> {
    (1..f.len() - 1)
        .filter(|&i| f[i] > f[i - 1] && f[i] >= f[i + 1])
        .map(|i| xs[i])
        .collect()
}

#[test]
fn bimodal_density_recovers_both_modes() {
    let (mix, chain) = bimodal_chain().unwrap();
    let fit = IcosFit::new(&chain, &FitConfig::new(13)).unwrap();
    let grid = &chain.strikes;
    let step = grid[1] - grid[0];
    let est: Vec<f64> = grid
        .iter()
        .map(|k| fit.point(Target::Rnd(k.ln())).unwrap())
        .collect();
    let truth: Vec<f64> = grid.iter().map(|k| mix.rnd_log(k.ln())).collect();
    let want = local_maxima(grid, &truth);
    let got = local_maxima(grid, &est);
    assert_eq!(want.len(), 2, "{want:?}");
    assert_eq!(got.len(), 2, "{got:?}");
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= step + 1e-9, "{got:?} vs {want:?}");
    }
    for (w, planted) in want.iter().zip([1442.0, 1590.0]) {
        assert!((w - planted).abs() <= 10.0 * step);
    }
}

#[test]
fn order_rule_on_bimodal_fixture() {
    let (_, chain) = bimodal_chain().unwrap();
    let a = optimal_n(&chain, Scheme::Simpson, 5, 50).unwrap();
    assert_eq!(a, optimal_n(&chain, Scheme::Simpson, 5, 50).unwrap());
    assert!(a.n_star >= 5 && a.n_star < 50);
}

#[test]
fn delta_interval_contains_truth_up_to_bias() {
    let m = BsModel::new(4000.0, 0.0, 0.3, 1.0).unwrap();
    let (_, chain) = bs_chain(0.3, 365.0, &mc_strikes()).unwrap();
    let fit = IcosFit::new(
        &chain,
        &FitConfig {
            sine_terms: 25,
            ..FitConfig::new(7)
        },
    )
    .unwrap();
    for k in [3600.0, 4000.0, 4200.0] {
        let d = fit.delta_call(k).unwrap();
        assert!((d.value - m.delta_call(k)).abs() < 0.01);
    }
    assert_eq!(chain.right_at(4000.0), Right::Put);
}
