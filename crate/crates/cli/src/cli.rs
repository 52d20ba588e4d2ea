use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use icos::Scheme;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "icos",
    version,
    about = "Option-implied Fourier-cosine estimation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Quadrature rule: left, right, trapezoid or simpson.
    #[arg(long, global = true, value_parser = parse_scheme)]
    pub quad: Option<Scheme>,
    /// Cosine terms N; chosen by the order rule when absent.
    #[arg(long, global = true)]
    pub terms: Option<usize>,
    /// Sine terms for deltas; defaults to 2N.
    #[arg(long, global = true)]
    pub sine_terms: Option<usize>,
    /// Confidence level of the reported intervals.
    #[arg(long, global = true)]
    pub conf: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Round numbers for reading instead of printing 17 significant digits.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// TOML file with any of the global options; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub baseline: Option<Baseline>,
    /// Bandwidth constant of the kernel baseline.
    #[arg(long, global = true)]
    pub ks_c: Option<f64>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: icos::IcosError| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Icos,
    Ks,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Quote file with header expiry_days,rate,forward,strike,right,bid,ask.
    #[arg(long)]
    pub chain: PathBuf,
    /// Forward to use instead of the file's column or parity.
    #[arg(long)]
    pub forward: Option<f64>,
    /// Spline-regrid onto a uniform grid first; without a value uses 4(n-1)+1 points.
    #[arg(long, num_args = 0..=1, default_missing_value = "0")]
    pub regrid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Evaluation points (prices), comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "points")]
    pub at: Vec<f64>,
    /// Number of evenly spaced points across the strike interval.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RightArg {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityOf {
    /// Density of log S_T.
    LogPrice,
    /// Density of S_T.
    Price,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Bs,
    Svcj,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    /// Black-Scholes, 30 days, 201 strikes.
    Bs30,
    /// Black-Scholes, one year, 201 strikes.
    Bs1y,
    /// SVCJ, 30 days, 201 strikes.
    Svcj30,
    /// SPX-like quotes, 239 strikes on a non-uniform grid.
    Spx,
    /// SPX-like quotes with tick-size noise.
    SpxNoisy,
    /// Bimodal lognormal mixture, 205 strikes.
    Bimodal,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a chain and report N, the boundary regression and the coefficients.
    Fit {
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Interpolated option prices with confidence intervals.
    Price {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "call")]
        right: RightArg,
    },
    /// Risk-neutral density with confidence intervals.
    Rnd {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "log-price")]
        density: DensityOf,
    },
    /// Call deltas with confidence intervals.
    Delta {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo study on a synthetic market.
    Simulate {
        #[arg(long, value_enum, default_value = "bs")]
        model: ModelArg,
        /// Maturity: 30d or 1y (or any number of days, e.g. 45d).
        #[arg(long = "t", default_value = "30d", value_parser = parse_days)]
        days: f64,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        /// Quote-noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        /// Kernel bandwidth constants to compare, comma separated.
        #[arg(long, value_delimiter = ',')]
        ks_grid: Vec<f64>,
        /// CSV report; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split the VIX into corridor volatility, discretisation and observation error.
    Vix {
        #[arg(long, requires = "next", conflicts_with = "panel")]
        near: Option<PathBuf>,
        #[arg(long, requires = "near")]
        next: Option<PathBuf>,
        /// Directory of <day>_near.csv / <day>_next.csv pairs.
        #[arg(long)]
        panel: Option<PathBuf>,
        /// JSON output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick the number of cosine terms and print the decision trace.
    OptimalN {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = icos::order::DEFAULT_MIN_TERMS)]
        min: usize,
        #[arg(long, default_value_t = icos::order::DEFAULT_MAX_TERMS)]
        max: usize,
    },
    /// Write a synthetic chain in the quote-file format.
    GenChain {
        #[arg(long, value_enum)]
        fixture: Fixture,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic two-regime VIX panel as near/next quote files.
    GenPanel {
        #[arg(long)]
        out: PathBuf,
        /// Quote-noise standard deviation.
        #[arg(long, default_value_t = icos::fixtures::MC_NOISE)]
        noise: f64,
    },
}

fn parse_days(s: &str) -> Result<f64, String> {
    let s = s.trim().to_ascii_lowercase();
    let (num, unit) = match s.strip_suffix('d') {
        Some(n) => (n, 1.0),
        None => match s.strip_suffix('y') {
            Some(n) => (n, icos::market::DAYS_PER_YEAR),
            None => (s.as_str(), 1.0),
        },
    };
    let v: f64 = num
        .parse()
        .map_err(|_| format!("cannot read maturity `{s}`"))?;
    if v > 0.0 {
        Ok(v * unit)
    } else {
        Err(format!("maturity must be positive, got `{s}`"))
    }
}
