use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use icos::experiments::{run_mc, table_orders, McConfig, McDesign, ModelSpec};
use icos::fixtures;
use icos::kernel::nw_fit;
use icos::market::{default_regrid_size, load_chain, save_chain, spline_iv_regrid, IngestConfig};
use icos::order::{optimal_n, DEFAULT_MAX_TERMS, DEFAULT_MIN_TERMS};
use icos::vix::{dissect_panel, DissectConfig, VixDecomposition};
use icos::{EstimateWithCI, FitConfig, IcosFit, OptionChain, Right, Target};
use serde_json::json;

use crate::cli::{Baseline, ChainArgs, Command, DensityOf, Fixture, GridArgs, ModelArg, RightArg};
use crate::settings::Settings;
use crate::CliError;

type Res<T> = Result<T, CliError>;

pub fn run(cmd: Command, s: &Settings) -> Res<()> {
    match cmd {
        Command::Fit { chain } => cmd_fit(&chain, s),
        Command::Price { chain, grid, right } => cmd_curve(&chain, &grid, s, Curve::Price(right)),
        Command::Rnd {
            chain,
            grid,
            density,
        } => cmd_curve(&chain, &grid, s, Curve::Rnd(density)),
        Command::Delta { chain, grid } => cmd_curve(&chain, &grid, s, Curve::Delta),
        Command::Simulate {
            model,
            days,
            reps,
            noise,
            ks_grid,
            out,
        } => cmd_simulate(model, days, reps, noise, ks_grid, out.as_deref(), s),
        Command::Vix {
            near,
            next,
            panel,
            out,
        } => cmd_vix(near, next, panel, out.as_deref(), s),
        Command::OptimalN { chain, min, max } => cmd_optimal_n(&chain, min, max, s),
        Command::GenChain { fixture, out } => cmd_gen_chain(fixture, &out, s),
        Command::GenPanel { out, noise } => cmd_gen_panel(&out, noise, s),
    }
}

fn load(args: &ChainArgs) -> Res<OptionChain> {
    let chain = load_chain(
        &args.chain,
        &IngestConfig {
            forward: args.forward,
        },
    )?;
    Ok(match args.regrid {
        None => chain,
        Some(0) => spline_iv_regrid(&chain, default_regrid_size(chain.len()))?,
        Some(m) => spline_iv_regrid(&chain, m)?,
    })
}

fn fit_config(chain: &OptionChain, s: &Settings) -> Res<FitConfig> {
    let terms = match s.terms {
        Some(n) => n,
        None => optimal_n(chain, s.quad, DEFAULT_MIN_TERMS, DEFAULT_MAX_TERMS)?.n_star,
    };
    let mut cfg = FitConfig::new(terms);
    cfg.scheme = s.quad;
    cfg.conf = s.conf;
    if let Some(nt) = s.sine_terms {
        cfg.sine_terms = nt;
    }
    Ok(cfg)
}

fn write_out(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json(v: &serde_json::Value, s: &Settings) -> String {
    let mut text = if s.pretty {
        serde_json::to_string_pretty(v).expect("serialisable")
    } else {
        serde_json::to_string(v).expect("serialisable")
    };
    text.push('\n');
    text
}

fn est_json(e: &EstimateWithCI) -> serde_json::Value {
    json!({ "value": e.value, "std_err": e.std_err, "lower": e.lower, "upper": e.upper })
}

fn cmd_fit(args: &ChainArgs, s: &Settings) -> Res<()> {
    let chain = load(args)?;
    let selection = match s.terms {
        Some(_) => None,
        None => Some(optimal_n(
            &chain,
            s.quad,
            DEFAULT_MIN_TERMS,
            DEFAULT_MAX_TERMS,
        )?),
    };
    let mut cfg = fit_config(&chain, s)?;
    if let Some(sel) = &selection {
        cfg.terms = sel.n_star;
        if s.sine_terms.is_none() {
            cfg.sine_terms = 2 * sel.n_star;
        }
    }
    let fit = IcosFit::new(&chain, &cfg)?;
    let theta = fit.theta_estimate();
    let a: Vec<_> = fit.a_coeffs()?.iter().map(est_json).collect();
    let iv = fit.interval();
    let v = json!({
        "strikes": chain.len(),
        "interval": [iv.alpha, iv.beta],
        "forward": chain.forward,
        "expiry_days": chain.expiry_days,
        "rate": chain.rate,
        "scheme": cfg.scheme,
        "terms": cfg.terms,
        "sine_terms": cfg.sine_terms,
        "selected_by_rule": selection.is_some(),
        "theta": theta,
        "residual_sigma": fit.covariance.mean_sigma(),
        "degrees_of_freedom": fit.covariance.nu,
        "a": a,
        "trace": selection.map(|sel| sel.trace),
    });
    write_out(None, &to_json(&v, s))
}

#[derive(Debug, Clone, Copy)]
enum Curve {
    Price(RightArg),
    Rnd(DensityOf),
    Delta,
}

fn grid(args: &GridArgs, chain: &OptionChain, log_spacing: bool) -> Res<Vec<f64>> {
    if !args.at.is_empty() {
        return Ok(args.at.clone());
    }
    let n = args.points.unwrap_or(101);
    if n < 2 {
        return Err(CliError::new("usage", "--points needs at least 2"));
    }
    let iv = chain.interval();
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                return iv.beta;
            }
            let w = i as f64 / (n - 1) as f64;
            if log_spacing {
                (iv.alpha.ln() + w * (iv.beta.ln() - iv.alpha.ln())).exp()
            } else {
                iv.alpha + w * (iv.beta - iv.alpha)
            }
        })
        .collect())
}

fn cmd_curve(args: &ChainArgs, grid_args: &GridArgs, s: &Settings, curve: Curve) -> Res<()> {
    let chain = load(args)?;
    let xs = grid(grid_args, &chain, matches!(curve, Curve::Rnd(_)))?;
    let mut out = String::new();
    out.push_str(match curve {
        Curve::Rnd(_) => "price,log_price,estimate,std_err,lower,upper\n",
        _ => "strike,estimate,std_err,lower,upper\n",
    });
    let row = |out: &mut String, x: f64, e: EstimateWithCI| {
        if let Curve::Rnd(_) = curve {
            out.push_str(&format!("{},{},", s.num(x), s.num(x.ln())));
        } else {
            out.push_str(&format!("{},", s.num(x)));
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.num(e.value),
            s.num(e.std_err),
            s.num(e.lower),
            s.num(e.upper)
        ));
    };
    match s.baseline {
        Baseline::Icos => {
            let fit = IcosFit::new(&chain, &fit_config(&chain, s)?)?;
            for &x in &xs {
                let target = match curve {
                    Curve::Price(RightArg::Call) => Target::Call(x),
                    Curve::Price(RightArg::Put) => Target::Put(x),
                    Curve::Rnd(DensityOf::LogPrice) => Target::Rnd(x.ln()),
                    Curve::Rnd(DensityOf::Price) => Target::RndPrice(x),
                    Curve::Delta => Target::Delta(x),
                };
                row(&mut out, x, fit.estimate(target)?);
            }
        }
        Baseline::Ks => {
            let sm = nw_fit(&chain, s.ks_c)?;
            for &x in &xs {
                let v = match curve {
                    Curve::Price(RightArg::Call) => sm.nw_price(x, Right::Call)?,
                    Curve::Price(RightArg::Put) => sm.nw_price(x, Right::Put)?,
                    Curve::Rnd(DensityOf::LogPrice) => sm.nw_rnd(x.ln())?,
                    Curve::Rnd(DensityOf::Price) => sm.nw_rnd(x.ln())? / x,
                    Curve::Delta => sm.nw_delta(x)?,
                };
                // the kernel baseline has no distribution theory
                row(
                    &mut out,
                    x,
                    EstimateWithCI {
                        value: v,
                        std_err: f64::NAN,
                        lower: f64::NAN,
                        upper: f64::NAN,
                    },
                );
            }
        }
    }
    write_out(None, &out)
}

fn cmd_simulate(
    model: ModelArg,
    days: f64,
    reps: usize,
    noise: Option<f64>,
    ks_grid: Vec<f64>,
    out: Option<&Path>,
    s: &Settings,
) -> Res<()> {
    let spec = match model {
        ModelArg::Bs => ModelSpec::bs(),
        ModelArg::Svcj => ModelSpec::svcj(),
    };
    let (n, nt) = table_orders(&spec, days);
    let mut cfg =
        McConfig::new(s.terms.unwrap_or(n), s.sine_terms.unwrap_or(nt)).with_scheme(s.quad);
    cfg.fit.conf = s.conf;
    cfg.ks_c = if !ks_grid.is_empty() {
        ks_grid
    } else if s.baseline == Baseline::Ks {
        vec![s.ks_c]
    } else {
        Vec::new()
    };
    let mut design = McDesign::new(spec, days, reps, s.seed);
    if let Some(e) = noise {
        design.noise = e;
    }
    let report = run_mc(&design, &cfg)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_out(out, &String::from_utf8(buf).expect("csv is utf-8"))
}

fn panel_pairs(dir: &Path) -> Res<Vec<(String, PathBuf, PathBuf)>> {
    let mut days = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if let Some(day) = name.strip_suffix("_near.csv") {
            let next = dir.join(format!("{day}_next.csv"));
            if !next.exists() {
                return Err(CliError::new(
                    "io",
                    format!("{} has no matching {}", path.display(), next.display()),
                ));
            }
            days.push((day.to_string(), path, next));
        }
    }
    if days.is_empty() {
        return Err(CliError::new(
            "io",
            format!("no <day>_near.csv files in {}", dir.display()),
        ));
    }
    days.sort();
    Ok(days)
}

fn dissect_config(s: &Settings) -> DissectConfig {
    DissectConfig {
        scheme: s.quad,
        terms: s.terms,
        ..DissectConfig::default()
    }
}

fn cmd_vix(
    near: Option<PathBuf>,
    next: Option<PathBuf>,
    panel: Option<PathBuf>,
    out: Option<&Path>,
    s: &Settings,
) -> Res<()> {
    let ingest = IngestConfig::default();
    let days: Vec<(String, PathBuf, PathBuf)> = match (near, next, panel) {
        (Some(a), Some(b), None) => vec![(String::new(), a, b)],
        (None, None, Some(dir)) => panel_pairs(&dir)?,
        _ => {
            return Err(CliError::new(
                "usage",
                "give either --near and --next, or --panel",
            ))
        }
    };
    let chains = days
        .iter()
        .map(|(_, a, b)| Ok((load_chain(a, &ingest)?, load_chain(b, &ingest)?)))
        .collect::<Res<Vec<_>>>()?;
    let results = dissect_panel(&chains, &dissect_config(s));
    let value = if days.len() == 1 && days[0].0.is_empty() {
        let d: VixDecomposition = results.into_iter().next().expect("one day")?;
        serde_json::to_value(d).expect("serialisable")
    } else {
        let rows = days
            .iter()
            .zip(results)
            .map(|((day, _, _), r)| {
                Ok(match r {
                    Ok(d) => json!({ "day": day, "result": d }),
                    Err(e) => json!({ "day": day, "error": e.to_string() }),
                })
            })
            .collect::<Res<Vec<_>>>()?;
        serde_json::Value::Array(rows)
    };
    write_out(out, &to_json(&value, s))
}

fn cmd_optimal_n(args: &ChainArgs, min: usize, max: usize, s: &Settings) -> Res<()> {
    let chain = load(args)?;
    let sel = optimal_n(&chain, s.quad, min, max)?;
    write_out(
        None,
        &to_json(&serde_json::to_value(sel).expect("serialisable"), s),
    )
}

fn cmd_gen_chain(fixture: Fixture, out: &Path, s: &Settings) -> Res<()> {
    let strikes = fixtures::mc_strikes();
    let chain = match fixture {
        Fixture::Bs30 => fixtures::bs_chain(0.3, 30.0, &strikes)?.1,
        Fixture::Bs1y => fixtures::bs_chain(0.3, 365.0, &strikes)?.1,
        Fixture::Svcj30 => fixtures::svcj_chain(Default::default(), 30.0, &strikes)?.1,
        Fixture::Spx => fixtures::spx_like_chain()?,
        Fixture::SpxNoisy => fixtures::spx_like_noisy_chain(s.seed)?,
        Fixture::Bimodal => fixtures::bimodal_chain()?.1,
    };
    save_chain(out, &chain)?;
    Ok(())
}

fn cmd_gen_panel(out: &Path, noise: f64, s: &Settings) -> Res<()> {
    fs::create_dir_all(out)?;
    let panel = fixtures::vix_panel(
        &[fixtures::VixRegime::LOW, fixtures::VixRegime::HIGH],
        noise,
        s.seed,
    )?;
    for (i, day) in panel.iter().enumerate() {
        save_chain(out.join(format!("day{i:03}_near.csv")), &day.near)?;
        save_chain(out.join(format!("day{i:03}_next.csv")), &day.next)?;
    }
    Ok(())
}
