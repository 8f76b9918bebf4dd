//! Experiment configuration, read from a TOML file.
//!
//! Every random stream is derived from `master_seed` with
//! [`derive_seed`](crate::rng::derive_seed) at a fixed index; seeds written
//! inside sub-sections are ignored.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::content_hash;
use crate::classifiers::{LayerKind, ModelParams};
use crate::drift::DriftPolicy;
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::featurize::WindowSpec;
use crate::resample::SmoteConfig;
use crate::rng::derive_seed;
use crate::sim::SimConfig;

/// Sub-seed indices.
pub mod seed_index {
    pub const SIM: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const ENSEMBLE: u64 = 2;
    pub const MONITOR_SIM: u64 = 3;
    pub const MONITOR_RETRAIN: u64 = 4;
    /// Ablation run `i` uses master seed `derive_seed(master, ABLATION + i)`.
    pub const ABLATION: u64 = 100;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub layers: Vec<LayerKind>,
    pub validation_fraction: f64,
    pub use_smote: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        Self {
            layers: d.layers,
            validation_fraction: d.validation_fraction,
            use_smote: d.use_smote,
        }
    }
}

/// Drift-monitoring stream: the base `[sim]` network run for
/// `windows * block_ticks` ticks, with `attacker_ids` switching to
/// `attack_rate` at window `jump_window` (no attack when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub windows: usize,
    pub block_ticks: u64,
    pub attacker_ids: Vec<usize>,
    pub attack_rate: f64,
    pub jump_window: Option<usize>,
}

impl Default for MonitorSection {
    fn default() -> Self {
        Self {
            windows: 50,
            block_ticks: 500,
            attacker_ids: (12..20).collect(),
            attack_rate: 200.0,
            jump_window: Some(25),
        }
    }
}

/// SMOTE on/off comparison on a persistently attacked network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    /// Number of master seeds; 0 disables the ablation in reports.
    pub seeds: usize,
    /// Attack active for the whole run, which with one attacker among
    /// 20 nodes yields roughly 95/5 benign/attack windows.
    pub full_duration_attack: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            seeds: 10,
            full_duration_attack: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub split_fraction: f64,
    pub output_dir: PathBuf,
    pub sim: SimConfig,
    pub window: WindowSpec,
    pub smote: SmoteConfig,
    pub ensemble: EnsembleSection,
    pub model: ModelParams,
    pub drift: DriftPolicy,
    pub monitor: MonitorSection,
    pub ablation: AblationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            split_fraction: 0.8,
            output_dir: PathBuf::from("out"),
            sim: SimConfig::default(),
            window: WindowSpec::default(),
            smote: SmoteConfig::default(),
            ensemble: EnsembleSection::default(),
            model: ModelParams::default(),
            drift: DriftPolicy::default(),
            monitor: MonitorSection::default(),
            ablation: AblationSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(path, line, e.message().to_owned())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Hash of the canonical serialization (output directory excluded),
    /// stamped into artifact headers.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        content_hash(canonical.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        self.window.validate()?;
        self.smote.validate()?;
        self.ensemble_config().validate()?;
        self.drift.validate()?;
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config(
                "split_fraction",
                "must lie strictly between 0 and 1",
            ));
        }
        if self.monitor.block_ticks == 0 {
            return Err(Error::config("monitor.block_ticks", "must be > 0"));
        }
        if self.monitor.jump_window.is_some_and(|j| j > self.monitor.windows) {
            return Err(Error::config(
                "monitor.jump_window",
                "must not exceed monitor.windows",
            ));
        }
        self.monitor_sim_config().validate()
    }

    pub fn seed(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, index)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            rng_seed: self.seed(seed_index::SIM),
            ..self.sim.clone()
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            layers: self.ensemble.layers.clone(),
            validation_fraction: self.ensemble.validation_fraction,
            use_smote: self.ensemble.use_smote,
            smote: self.smote.clone(),
            model: self.model.clone(),
            seed: self.seed(seed_index::ENSEMBLE),
        }
    }

    pub fn drift_policy(&self) -> DriftPolicy {
        DriftPolicy {
            seed: self.seed(seed_index::MONITOR_RETRAIN),
            ..self.drift.clone()
        }
    }

    pub fn monitor_sim_config(&self) -> SimConfig {
        let m = &self.monitor;
        let duration = m.windows as u64 * m.block_ticks;
        let (start, rate) = match m.jump_window {
            Some(j) => (j as u64 * m.block_ticks, m.attack_rate),
            None => (duration, 0.0),
        };
        SimConfig {
            attacker_ids: m.attacker_ids.clone(),
            duration_ticks: duration,
            attack_rate: rate,
            attack_start_tick: start,
            attack_stop_tick: duration,
            rng_seed: self.seed(seed_index::MONITOR_SIM),
            ..self.sim.clone()
        }
    }

    /// Same experiment under a different master seed.
    pub fn with_master_seed(&self, master_seed: u64) -> Self {
        Self {
            master_seed,
            ..self.clone()
        }
    }
}
