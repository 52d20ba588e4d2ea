use std::path::Path;

use icos::Scheme;
use serde::Deserialize;

use crate::cli::{Baseline, Global};

/// Optional TOML file mirroring the global flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    /// Same spellings as `--quad`.
    pub quad: Option<String>,
    pub terms: Option<usize>,
    pub sine_terms: Option<usize>,
    pub conf: Option<f64>,
    pub seed: Option<u64>,
    pub pretty: Option<bool>,
    pub baseline: Option<Baseline>,
    pub ks_c: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Global settings after merging: flag, then config file, then default.
#[derive(Debug, Clone)]
pub struct Settings {
    pub quad: Scheme,
    pub terms: Option<usize>,
    pub sine_terms: Option<usize>,
    pub conf: f64,
    pub seed: u64,
    pub pretty: bool,
    pub baseline: Baseline,
    pub ks_c: f64,
}

impl Settings {
    pub fn resolve(flags: &Global) -> Result<Self, String> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let file_quad = match &file.quad {
            Some(q) => Some(q.parse::<Scheme>().map_err(|e| e.to_string())?),
            None => None,
        };
        Ok(Self {
            quad: flags.quad.or(file_quad).unwrap_or_default(),
            terms: flags.terms.or(file.terms),
            sine_terms: flags.sine_terms.or(file.sine_terms),
            conf: flags.conf.or(file.conf).unwrap_or(0.95),
            seed: flags.seed.or(file.seed).unwrap_or(42),
            pretty: flags.pretty || file.pretty.unwrap_or(false),
            baseline: flags.baseline.or(file.baseline).unwrap_or(Baseline::Icos),
            ks_c: flags.ks_c.or(file.ks_c).unwrap_or(0.05),
        })
    }

    pub fn num(&self, x: f64) -> String {
        if self.pretty {
            format!("{x:.6}")
        } else {
            format!("{x:.16e}")
        }
    }
}
