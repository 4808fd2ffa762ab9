//! Run configuration: one TOML file, overridden by command-line flags.
//!
//! Every default equals the published analysis settings. Relative input
//! paths are resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mobility_core::analysis::SensitivityGrid;
use mobility_core::smoothing::DEFAULT_WINDOWS;
use mobility_core::synthgen::SyntheticWorldConfig;
use mobility_core::uncertainty::BootstrapConfig;
use mobility_core::EstimationParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub observations: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub iterations: usize,
    pub alpha: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let d = BootstrapConfig::default();
        Self { iterations: d.iterations, alpha: d.alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub windows: Vec<usize>,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self { windows: DEFAULT_WINDOWS.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSection {
    /// Windows to correlate; 1 is the unsmoothed series.
    pub q: Vec<usize>,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        let mut q = vec![1];
        q.extend(DEFAULT_WINDOWS);
        Self { q }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSection {
    pub q: Vec<usize>,
    /// Confidence level of the fitted-curve band.
    pub level: f64,
    pub curve_points: usize,
    /// Number of subsampled synthetic countries.
    pub synthetic_countries: usize,
    /// Smallest agent fraction of the synthetic experiment.
    pub min_fraction: f64,
}

impl Default for RegressionSection {
    fn default() -> Self {
        Self { q: vec![1, 7], level: 0.95, curve_points: 61, synthetic_countries: 17, min_fraction: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputPaths,
    /// Countries to process; empty means every country of the region file.
    pub countries: Vec<String>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// Seed of every random stream: bootstrap, simulation and subsampling.
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: PathBuf,
    pub estimation: EstimationParams,
    pub bootstrap: BootstrapSection,
    pub smoothing: SmoothingSection,
    pub correlation: CorrelationSection,
    pub sensitivity: SensitivityGrid,
    pub regression: RegressionSection,
    pub simulate: SyntheticWorldConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: InputPaths::default(),
            countries: Vec::new(),
            start: None,
            end: None,
            seed: 0,
            threads: None,
            output: PathBuf::from("out"),
            estimation: EstimationParams::default(),
            bootstrap: BootstrapSection::default(),
            smoothing: SmoothingSection::default(),
            correlation: CorrelationSection::default(),
            sensitivity: SensitivityGrid::default(),
            regression: RegressionSection::default(),
            simulate: SyntheticWorldConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input.observations, &mut cfg.input.regions, &mut cfg.input.reference].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig { iterations: self.bootstrap.iterations, alpha: self.bootstrap.alpha, seed: self.seed }
    }

    /// Checks the settings every command relies on.
    pub fn validate(&self) -> Result<()> {
        self.estimation.validate().map_err(CliError::input)?;
        self.bootstrap_config().validate().map_err(CliError::input)?;
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(CliError::input(format!("start date {s} is after end date {e}")));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::input("threads must be at least 1"));
        }
        for q in self.smoothing.windows.iter().chain(&self.correlation.q).chain(&self.regression.q) {
            if *q == 0 {
                return Err(CliError::input("smoothing windows must be at least one day"));
            }
        }
        if !(self.regression.level > 0.0 && self.regression.level < 1.0) {
            return Err(CliError::input("regression level must be in (0, 1)"));
        }
        Ok(())
    }

    /// The settings that determine results, for the run log. Output location
    /// and thread count are left out since they do not change any result.
    pub fn effective_toml(&self) -> String {
        let mut shown = self.clone();
        shown.output = PathBuf::new();
        shown.threads = None;
        toml::to_string(&shown).expect("config serializes")
    }

    pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        let p = path.as_deref().ok_or_else(|| CliError::input(format!("no {what} input given")))?;
        if !p.exists() {
            return Err(CliError::input(format!("{what} input {} does not exist", p.display())));
        }
        Ok(p)
    }
}
