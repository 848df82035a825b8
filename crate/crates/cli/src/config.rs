//! Optional JSON defaults; every key mirrors a command-line flag.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::args::{BracketArg, CvVolArg, McArgs, SigmaSchemeArg, SplitModeArg};
use sabr_core::mc::McConfig;
use sabr_core::nn::TrainConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps_per_year: Option<f64>,
    pub cv_vol: Option<CvVolArg>,
    pub sigma_scheme: Option<SigmaSchemeArg>,
    pub hagan_bracket: Option<BracketArg>,
    pub t: Option<f64>,
    pub f0: Option<f64>,
    pub k: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub nu: Option<f64>,
    pub strikes: Option<String>,
    pub configs: Option<usize>,
    pub split_mode: Option<SplitModeArg>,
    pub arch: Option<String>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub train: Option<TrainConfig>,
    pub maturities: Option<Vec<f64>>,
    pub sweep_bucket: Option<String>,
    pub moneyness_band: Option<f64>,
    pub bench_points: Option<usize>,
    pub points: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Monte Carlo settings: flags, then file, then defaults.
    pub fn mc(&self, flags: &McArgs, default_paths: usize) -> McConfig {
        let d = McConfig::default();
        McConfig {
            paths: flags.paths.or(self.paths).unwrap_or(default_paths),
            steps_per_year: flags
                .steps_per_year
                .or(self.steps_per_year)
                .unwrap_or(d.steps_per_year),
            min_steps: d.min_steps,
            cv_vol_mode: flags.cv_vol.or(self.cv_vol).map_or(d.cv_vol_mode, Into::into),
            sigma_scheme: flags
                .sigma_scheme
                .or(self.sigma_scheme)
                .map_or(d.sigma_scheme, Into::into),
            base_seed: flags.seed.or(self.seed).unwrap_or(d.base_seed),
        }
    }

    pub fn train(&self) -> TrainConfig {
        self.train.clone().unwrap_or_default()
    }
}
