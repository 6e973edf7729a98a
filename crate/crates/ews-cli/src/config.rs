//! Run configuration: one TOML file describing data, labeling, methods and
//! experiment parameters. Command-line flags override individual fields.
//! The canonical serialized form (not the input file) is hashed and copied
//! into every output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ews_core::classify::MethodSpec;
use ews_core::ensemble::AggregateKind;
use ews_core::eval::Preference;
use ews_core::experiment::RecursiveConfig;
use ews_core::panel::{FeatureSpec, Horizon};
use ews_core::quarter::Quarter;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub panel: PathBuf,
    pub events: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelingConfig {
    /// Earliest pre-crisis lead, in quarters before a crisis start.
    #[serde(default = "defaults::horizon_lo")]
    pub horizon_lo: u32,
    /// Latest pre-crisis lead.
    #[serde(default = "defaults::horizon_hi")]
    pub horizon_hi: u32,
    /// Quarters excluded after a crisis ends.
    #[serde(default = "defaults::post_crisis_quarters")]
    pub post_crisis_quarters: u32,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            horizon_lo: defaults::horizon_lo(),
            horizon_hi: defaults::horizon_hi(),
            post_crisis_quarters: defaults::post_crisis_quarters(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursiveSection {
    /// First prediction quarter.
    #[serde(default = "defaults::recursive_start")]
    pub start: Quarter,
    /// First prediction quarter for QDA, which needs deeper history.
    #[serde(default = "defaults::qda_start")]
    pub qda_start: Quarter,
    /// Last prediction quarter, inclusive.
    #[serde(default)]
    pub end: Option<Quarter>,
    /// Shift columns by their publication lags before fitting.
    #[serde(default = "defaults::yes")]
    pub apply_publication_lags: bool,
}

impl Default for RecursiveSection {
    fn default() -> Self {
        RecursiveSection {
            start: defaults::recursive_start(),
            qda_start: defaults::qda_start(),
            end: None,
            apply_publication_lags: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Policymaker preference weight on missed crises.
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default = "defaults::folds")]
    pub folds: usize,
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    /// Significance level for resampled tests.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub labeling: LabelingConfig,
    /// Feature pipeline; empty means every raw indicator enters as a level.
    #[serde(default)]
    pub features: Vec<FeatureSpec>,
    #[serde(default = "defaults::methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "defaults::aggregates")]
    pub aggregates: Vec<AggregateKind>,
    /// Candidate specs for the gridsearch command.
    #[serde(default)]
    pub grid: Vec<MethodSpec>,
    #[serde(default)]
    pub recursive: RecursiveSection,
}

mod defaults {
    use super::*;

    pub fn seed() -> u64 {
        42
    }
    pub fn mu() -> f64 {
        0.8
    }
    pub fn folds() -> usize {
        10
    }
    pub fn replicates() -> usize {
        500
    }
    pub fn alpha() -> f64 {
        0.1
    }
    pub fn horizon_lo() -> u32 {
        5
    }
    pub fn horizon_hi() -> u32 {
        12
    }
    pub fn post_crisis_quarters() -> u32 {
        8
    }
    pub fn recursive_start() -> Quarter {
        Quarter::new(2005, 2).expect("valid")
    }
    pub fn qda_start() -> Quarter {
        Quarter::new(2006, 2).expect("valid")
    }
    pub fn yes() -> bool {
        true
    }
    pub fn methods() -> Vec<MethodSpec> {
        MethodSpec::benchmark_race(0)
    }
    pub fn aggregates() -> Vec<AggregateKind> {
        AggregateKind::all().to_vec()
    }
}

/// Field overrides taken from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mu: Option<f64>,
    pub folds: Option<usize>,
    pub replicates: Option<usize>,
    pub alpha: Option<f64>,
}

impl RunConfig {
    /// Loads, overrides and validates a configuration. Relative data paths
    /// are resolved against the config file's directory. Returns the config
    /// together with its canonical serialization.
    pub fn load(path: &Path, overrides: Overrides) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.data.panel = resolve(dir, &cfg.data.panel);
            cfg.data.events = resolve(dir, &cfg.data.events);
            if let Some(out) = &cfg.out {
                cfg.out = Some(resolve(dir, out));
            }
        }
        cfg.apply(overrides);
        cfg.validate()?;
        let canonical = cfg.canonical()?;
        Ok((cfg, canonical))
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(mu) = overrides.mu {
            self.mu = mu;
        }
        if let Some(folds) = overrides.folds {
            self.folds = folds;
        }
        if let Some(replicates) = overrides.replicates {
            self.replicates = replicates;
        }
        if let Some(alpha) = overrides.alpha {
            self.alpha = alpha;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(CliError::config(format!("mu must be in (0, 1), got {}", self.mu)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.folds < 2 {
            return Err(CliError::config("folds must be at least 2"));
        }
        if self.replicates < 2 {
            return Err(CliError::config("replicates must be at least 2"));
        }
        if self.methods.is_empty() {
            return Err(CliError::config("method list is empty"));
        }
        if self.labeling.horizon_lo < 1 || self.labeling.horizon_hi < self.labeling.horizon_lo {
            return Err(CliError::config(format!(
                "horizon {}..{} is not a valid lead window",
                self.labeling.horizon_lo, self.labeling.horizon_hi
            )));
        }
        if self.recursive.qda_start < self.recursive.start {
            return Err(CliError::config(
                "recursive.qda_start cannot precede recursive.start",
            ));
        }
        for spec in self.methods.iter().chain(&self.grid) {
            spec.validate_params()
                .map_err(|e| CliError::config(e.to_string()))?;
        }
        Ok(())
    }

    /// The canonical serialized form used for hashing and artifact copies.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::config(format!("serialize config: {e}")))
    }

    pub fn sha256(canonical: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn preference(&self) -> Result<Preference> {
        Ok(Preference::new(self.mu)?)
    }

    pub fn horizon(&self) -> Result<Horizon> {
        Ok(Horizon::new(self.labeling.horizon_lo, self.labeling.horizon_hi)?)
    }

    pub fn recursive_config(&self) -> RecursiveConfig {
        RecursiveConfig {
            start: self.recursive.start,
            qda_start: self.recursive.qda_start,
            end: self.recursive.end,
        }
    }

    /// A ready-to-run config for a freshly generated synthetic panel, with
    /// the recursive window placed on the panel's own crisis calendar.
    pub fn synthetic_defaults(data: DataConfig, seed: u64, start: Quarter) -> Self {
        RunConfig {
            seed,
            mu: defaults::mu(),
            folds: defaults::folds(),
            replicates: defaults::replicates(),
            alpha: defaults::alpha(),
            out: None,
            data,
            labeling: LabelingConfig::default(),
            features: Vec::new(),
            methods: defaults::methods(),
            aggregates: defaults::aggregates(),
            grid: Vec::new(),
            recursive: RecursiveSection {
                start,
                qda_start: start.offset(4),
                end: None,
                apply_publication_lags: true,
            },
        }
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}
