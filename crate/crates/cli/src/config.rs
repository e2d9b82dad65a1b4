//! Optional TOML configuration. Every key mirrors a command-line flag; a flag
//! given on the command line wins over the file, the file over built-in
//! defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub s_step: Option<f64>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub alpha: Option<f64>,
    pub beta_f: Option<f64>,
    pub c: Option<f64>,
    pub polarity: Option<String>,
    pub fusion: Option<String>,
    pub axis: Option<String>,
    pub spacing: Option<f64>,
    pub min_length_mm: Option<f64>,
    pub max_length_mm: Option<f64>,

    pub scale: Option<String>,
    pub count_kind: Option<String>,
    pub n: Option<usize>,
    pub lognormal_mu: Option<f64>,
    pub lognormal_sigma: Option<f64>,
    pub label_source: Option<String>,

    pub s_min_range: Option<String>,
    pub s_max_range: Option<String>,
    pub t1_range: Option<String>,
    pub t2_range: Option<String>,

    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag, then config, then default.
pub fn pick<T: Clone>(flag: Option<T>, config: &Option<T>, default: T) -> T {
    flag.or_else(|| config.clone()).unwrap_or(default)
}
