//! Experiment configuration: a JSON document bundling the driver, the
//! optimizer and sampler settings, and the sweep/output options.

use crate::{CliError, CliResult};
use nqs::drivers::{parse_couplings_csv, DriverSpec};
use nqs::rdm::RdmMode;
use nqs::sampler::SamplerConfig;
use nqs::sr::SrConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Spectrum evaluation mode named in configs and flags.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum RdmModeCfg {
    #[default]
    Exact,
    Gibbs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub driver: DriverSpec,
    #[serde(default)]
    pub sr: SrConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Field-to-coupling ratios swept by `scan-g` and `fisher`.
    #[serde(default)]
    pub g_list: Vec<f64>,
    /// Driver sizes swept by `entropy`; defaults to the driver's size.
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// Random initializations per training set.
    #[serde(default = "defaults::n_inits")]
    pub n_inits: usize,
    /// Best-converged runs kept per sweep point.
    #[serde(default = "defaults::keep_best")]
    pub keep_best: usize,
    /// Hidden-node density p/n; the hidden register gets round(alpha * n)
    /// neurons, at least one.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub rdm_mode: RdmModeCfg,
    /// Sample count per pair in Gibbs mode.
    #[serde(default = "defaults::gibbs_samples")]
    pub gibbs_samples: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Master seed; every run, iteration, and pair derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Optional CSV file (row per site) with explicit couplings.
    #[serde(default)]
    pub couplings_csv: Option<PathBuf>,
}

mod defaults {
    pub fn n_inits() -> usize {
        10
    }
    pub fn keep_best() -> usize {
        5
    }
    pub fn alpha() -> f64 {
        1.0
    }
    pub fn gibbs_samples() -> usize {
        100_000
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(csv) = cfg.couplings_csv.clone() {
            let resolved = if csv.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(csv)
            } else {
                csv
            };
            let text = std::fs::read_to_string(&resolved).map_err(|e| {
                CliError::Config(format!("cannot read couplings {}: {e}", resolved.display()))
            })?;
            cfg.driver = cfg.driver.clone().with_couplings(parse_couplings_csv(&text)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.driver.validate()?;
        self.sr.validate()?;
        if !(self.alpha > 0.0) {
            return Err(CliError::Config("alpha must be positive".into()));
        }
        if self.keep_best == 0 {
            return Err(CliError::Config("keep_best must be at least 1".into()));
        }
        Ok(())
    }

    /// Hidden register size p = round(alpha * n), at least 1.
    pub fn hidden_units(&self) -> usize {
        ((self.alpha * self.driver.n as f64).round() as usize).max(1)
    }

    pub fn rdm_mode(&self) -> RdmMode {
        match self.rdm_mode {
            RdmModeCfg::Exact => RdmMode::Exact,
            RdmModeCfg::Gibbs => RdmMode::Gibbs { n_samples: self.gibbs_samples },
        }
    }

    /// Ratios to sweep; falls back to the driver's own ratio.
    pub fn g_values(&self) -> Vec<f64> {
        if self.g_list.is_empty() {
            vec![self.driver.g()]
        } else {
            self.g_list.clone()
        }
    }

    /// Sizes swept by the entropy scan.
    pub fn n_values(&self) -> Vec<usize> {
        if self.n_list.is_empty() {
            vec![self.driver.n]
        } else {
            self.n_list.clone()
        }
    }
}
