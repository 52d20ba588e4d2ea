//! Monte Carlo harness: noisy replications of synthetic chains, summarised as
//! bias, dispersion, asymptotic standard error and interval coverage.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IcosError, Result};
use crate::estimators::{z_critical, FitConfig, FitDesign, IcosFit, Probe, Target};
use crate::fixtures::{add_noise, bs_chain, mc_strikes, mc_targets, svcj_chain, MC_NOISE};
use crate::kernel::nw_fit;
use crate::market::{OptionChain, Right};
use crate::models::svcj::SvcjParams;
use crate::models::{CharFn, CosPricer};
use crate::quadrature::Scheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    Bs { sigma: f64 },
    Svcj(SvcjParams),
}

impl ModelSpec {
    pub fn bs() -> Self {
        ModelSpec::Bs { sigma: 0.3 }
    }

    pub fn svcj() -> Self {
        ModelSpec::Svcj(SvcjParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Bs { .. } => "bs",
            ModelSpec::Svcj(_) => "svcj",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Call,
    Rnd,
    Delta,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Call, Quantity::Rnd, Quantity::Delta];

    fn target(self, k: f64) -> Target {
        match self {
            Quantity::Call => Target::Call(k),
            Quantity::Rnd => Target::Rnd(k.ln()),
            Quantity::Delta => Target::Delta(k),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Call => "call",
            Quantity::Rnd => "rnd",
            Quantity::Delta => "delta",
        })
    }
}

impl std::str::FromStr for Quantity {
    type Err = IcosError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "call" | "price" => Ok(Quantity::Call),
            "rnd" | "density" => Ok(Quantity::Rnd),
            "delta" => Ok(Quantity::Delta),
            _ => Err(IcosError::InvalidInput(format!("unknown quantity `{s}`"))),
        }
    }
}

/// The simulated market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDesign {
    pub model: ModelSpec,
    pub expiry_days: f64,
    pub strikes: Vec<f64>,
    pub noise: f64,
    pub reps: usize,
    pub seed: u64,
}

impl McDesign {
    pub fn new(model: ModelSpec, expiry_days: f64, reps: usize, seed: u64) -> Self {
        Self {
            model,
            expiry_days,
            strikes: mc_strikes(),
            noise: MC_NOISE,
            reps,
            seed,
        }
    }

    /// Exact OTM prices and the model behind them.
    pub fn truth_chain(&self) -> Result<(Box<dyn CharFn + Send + Sync>, OptionChain)> {
        Ok(match &self.model {
            ModelSpec::Bs { sigma } => {
                let (m, c) = bs_chain(*sigma, self.expiry_days, &self.strikes)?;
                (Box::new(m), c)
            }
            ModelSpec::Svcj(p) => {
                let (m, c) = svcj_chain(*p, self.expiry_days, &self.strikes)?;
                (Box::new(m), c)
            }
        })
    }
}

/// What to estimate in each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub fit: FitConfig,
    pub targets: Vec<f64>,
    pub quantities: Vec<Quantity>,
    /// Kernel-smoothing bandwidth constants; empty skips the baseline.
    pub ks_c: Vec<f64>,
}

impl McConfig {
    pub fn new(terms: usize, sine_terms: usize) -> Self {
        Self {
            fit: FitConfig {
                sine_terms,
                ..FitConfig::new(terms)
            },
            targets: mc_targets(),
            quantities: Quantity::ALL.to_vec(),
            ks_c: Vec::new(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.fit.scheme = scheme;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Icos,
    Kernel { c: f64 },
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Icos => f.write_str("icos"),
            Estimator::Kernel { c } => write!(f, "ks-{c}"),
        }
    }
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub estimator: Estimator,
    pub quantity: Quantity,
    pub strike: f64,
    pub truth: f64,
    pub bias: f64,
    pub mc_std: f64,
    /// Root of the mean estimated variance; NaN for the kernel baseline.
    pub as_std: f64,
    /// Share of intervals covering the truth; NaN for the kernel baseline.
    pub coverage: f64,
    pub ok: usize,
    pub failures: usize,
}

impl McCell {
    /// `|bias| ≤ k · MC std / √reps`.
    pub fn bias_within(&self, k: f64) -> bool {
        self.bias.abs() <= k * self.mc_std / (self.ok as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub model: String,
    pub expiry_days: f64,
    pub reps: usize,
    pub seed: u64,
    pub terms: usize,
    pub sine_terms: usize,
    /// Replications whose iCOS fit failed outright.
    pub failed_reps: usize,
    pub cells: Vec<McCell>,
}

impl McReport {
    pub fn cell(&self, estimator: Estimator, quantity: Quantity, strike: f64) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.quantity == quantity && c.strike == strike)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "model",
            "expiry_days",
            "estimator",
            "quantity",
            "strike",
            "truth",
            "bias",
            "mc_std",
            "as_std",
            "coverage",
            "ok",
            "failures",
        ])
        .map_err(csv_err)?;
        for c in &self.cells {
            w.write_record([
                self.model.clone(),
                format!("{}", self.expiry_days),
                c.estimator.to_string(),
                c.quantity.to_string(),
                format!("{}", c.strike),
                format!("{:.16e}", c.truth),
                format!("{:.16e}", c.bias),
                format!("{:.16e}", c.mc_std),
                format!("{:.16e}", c.as_std),
                format!("{:.16e}", c.coverage),
                c.ok.to_string(),
                c.failures.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> IcosError {
    IcosError::Parse(e.to_string())
}

/// Population values of every quantity at the targets.
pub fn truths(model: &dyn CharFn, targets: &[f64], quantity: Quantity) -> Vec<f64> {
    let pricer = CosPricer::default();
    match quantity {
        Quantity::Call => pricer.prices(model, targets, Right::Call),
        Quantity::Rnd => targets
            .iter()
            .map(|k| pricer.density_log(model, k.ln()))
            .collect(),
        Quantity::Delta => pricer.deltas_call(model, targets),
    }
}

/// Replication `rep` of `design` draws from its own stream of the master seed,
/// so results do not depend on scheduling.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

type Draw = Option<(f64, f64)>;

struct RepOutcome {
    icos: Option<Vec<Draw>>,
    kernel: Vec<Vec<Option<f64>>>,
}

#[derive(Default)]
struct Acc {
    n: usize,
    sum: f64,
    sum2: f64,
    var_sum: f64,
    covered: usize,
    failures: usize,
}

impl Acc {
    fn push(&mut self, err: f64) {
        self.n += 1;
        self.sum += err;
        self.sum2 += err * err;
    }

    fn finish(
        &self,
        estimator: Estimator,
        quantity: Quantity,
        strike: f64,
        truth: f64,
        with_se: bool,
    ) -> McCell {
        let n = self.n as f64;
        let mean = self.sum / n;
        let std = if self.n > 1 {
            ((self.sum2 - n * mean * mean).max(0.0) / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        McCell {
            estimator,
            quantity,
            strike,
            truth,
            bias: mean,
            mc_std: std,
            as_std: if with_se {
                (self.var_sum / n).sqrt()
            } else {
                f64::NAN
            },
            coverage: if with_se {
                self.covered as f64 / n
            } else {
                f64::NAN
            },
            ok: self.n,
            failures: self.failures,
        }
    }
}

pub fn run_mc(design: &McDesign, cfg: &McConfig) -> Result<McReport> {
    if design.reps == 0 {
        return Err(IcosError::InvalidInput(
            "at least one replication is required".into(),
        ));
    }
    let (model, truth_chain) = design.truth_chain()?;
    let fit_design = Arc::new(FitDesign::from_config(&truth_chain.strikes, &cfg.fit)?);
    let base = IcosFit::with_design(&truth_chain, fit_design.clone(), cfg.fit.conf)?;

    let mut probes: Vec<(Quantity, f64, Probe)> = Vec::new();
    let mut truth_vals = Vec::new();
    for &q in &cfg.quantities {
        let t = truths(model.as_ref(), &cfg.targets, q);
        for (&k, tv) in cfg.targets.iter().zip(t) {
            probes.push((q, k, base.probe(q.target(k))?));
            truth_vals.push(tv);
        }
    }

    let outcomes: Vec<RepOutcome> = (0..design.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(design.seed, rep);
            let noisy = match add_noise(&truth_chain, design.noise, &mut rng) {
                Ok(c) => c,
                Err(_) => {
                    return RepOutcome {
                        icos: None,
                        kernel: vec![vec![None; probes.len()]; cfg.ks_c.len()],
                    }
                }
            };
            let icos = IcosFit::with_design(&noisy, fit_design.clone(), cfg.fit.conf)
                .ok()
                .map(|fit| {
                    probes
                        .iter()
                        .map(|(_, _, p)| {
                            let v = fit.value(p);
                            let var = fit.variance(p);
                            (v.is_finite() && var.is_finite()).then_some((v, var))
                        })
                        .collect()
                });
            let kernel = cfg
                .ks_c
                .iter()
                .map(|&c| match nw_fit(&noisy, c) {
                    Ok(s) => probes
                        .iter()
                        .map(|&(q, k, _)| {
                            match q {
                                Quantity::Call => s.nw_price(k, Right::Call),
                                Quantity::Rnd => s.nw_rnd(k.ln()),
                                Quantity::Delta => s.nw_delta(k),
                            }
                            .ok()
                            .filter(|v| v.is_finite())
                        })
                        .collect(),
                    Err(_) => vec![None; probes.len()],
                })
                .collect();
            RepOutcome { icos, kernel }
        })
        .collect();

    let z_crit = z_critical(cfg.fit.conf)?;

    let mut icos_acc: Vec<Acc> = (0..probes.len()).map(|_| Acc::default()).collect();
    let mut ks_acc: Vec<Vec<Acc>> = cfg
        .ks_c
        .iter()
        .map(|_| (0..probes.len()).map(|_| Acc::default()).collect())
        .collect();
    let mut failed_reps = 0;
    for out in &outcomes {
        match &out.icos {
            Some(draws) => {
                for ((acc, draw), &truth) in icos_acc.iter_mut().zip(draws).zip(&truth_vals) {
                    match draw {
                        Some((v, var)) => {
                            acc.push(v - truth);
                            acc.var_sum += var;
                            if (v - truth).abs() <= z_crit * var.sqrt() {
                                acc.covered += 1;
                            }
                        }
                        None => acc.failures += 1,
                    }
                }
            }
            None => {
                failed_reps += 1;
                icos_acc.iter_mut().for_each(|a| a.failures += 1);
            }
        }
        for (accs, vals) in ks_acc.iter_mut().zip(&out.kernel) {
            for ((acc, v), &truth) in accs.iter_mut().zip(vals).zip(&truth_vals) {
                match v {
                    Some(v) => acc.push(v - truth),
                    None => acc.failures += 1,
                }
            }
        }
    }

    let mut cells = Vec::new();
    for (i, (q, k, _)) in probes.iter().enumerate() {
        cells.push(icos_acc[i].finish(Estimator::Icos, *q, *k, truth_vals[i], true));
    }
    for (c, accs) in cfg.ks_c.iter().zip(&ks_acc) {
        for (i, (q, k, _)) in probes.iter().enumerate() {
            cells.push(accs[i].finish(Estimator::Kernel { c: *c }, *q, *k, truth_vals[i], false));
        }
    }
    Ok(McReport {
        model: design.model.name().to_string(),
        expiry_days: design.expiry_days,
        reps: design.reps,
        seed: design.seed,
        terms: cfg.fit.terms,
        sine_terms: cfg.fit.sine_terms,
        failed_reps,
        cells,
    })
}

/// Expansion orders of the reference Monte Carlo tables: `(N, Ñ)` by model and tenor.
pub fn table_orders(model: &ModelSpec, expiry_days: f64) -> (usize, usize) {
    match model {
        ModelSpec::Bs { .. } if expiry_days >= 365.0 => (7, 25),
        ModelSpec::Bs { .. } => (14, 25),
        ModelSpec::Svcj(_) => (25, 30),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_single_rep_is_deterministic_bias() {
        let mut d = McDesign::new(ModelSpec::bs(), 30.0, 1, 1);
        d.noise = 0.0;
        let r = run_mc(&d, &McConfig::new(14, 25)).unwrap();
        let (model, chain) = d.truth_chain().unwrap();
        let cfg = McConfig::new(14, 25);
        let fit = IcosFit::new(&chain, &cfg.fit).unwrap();
        let c = r.cell(Estimator::Icos, Quantity::Call, 4000.0).unwrap();
        let truth = truths(model.as_ref(), &[4000.0], Quantity::Call)[0];
        assert_eq!(c.mc_std, 0.0);
        assert!((c.bias - (fit.price_call(4000.0).unwrap().value - truth)).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_repeat_bit_for_bit() {
        let d = McDesign::new(ModelSpec::bs(), 30.0, 12, 7);
        let mut cfg = McConfig::new(14, 25);
        cfg.ks_c = vec![0.2];
        let a = run_mc(&d, &cfg).unwrap();
        let b = run_mc(&d, &cfg).unwrap();
        let mut wa = Vec::new();
        let mut wb = Vec::new();
        a.write_csv(&mut wa).unwrap();
        b.write_csv(&mut wb).unwrap();
        assert_eq!(wa, wb);
        assert_eq!(a.cells.len(), 2 * 18);
    }

    #[test]
    fn streams_differ() {
        use rand::Rng;
        let a: u64 = replication_rng(3, 0).random();
        let b: u64 = replication_rng(3, 1).random();
        assert_ne!(a, b);
    }

    #[test]
    fn smoothing_below_noise_level() {
        let d = McDesign::new(ModelSpec::bs(), 30.0, 40, 11);
        let mut cfg = McConfig::new(14, 25);
        cfg.quantities = vec![Quantity::Call];
        let r = run_mc(&d, &cfg).unwrap();
        for c in &r.cells {
            assert!(c.mc_std < MC_NOISE, "{c:?}");
        }
    }
}
