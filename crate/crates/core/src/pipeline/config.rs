use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, SynthConfig};
use crate::generator::{GeneratorConfig, TrainConfig};
use crate::optimize::{LossWeights, OptimizeConfig};
use crate::scene::GsgThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub optimize: OptimizeConfig,
    /// Largest weighted total loss of an accepted person.
    pub accept_threshold: f64,
    /// Contact tolerance (m) of the contact score.
    pub contact_eps: f64,
    pub gsg: GsgThresholds,
}

/// Loss weights tuned on the synthetic held-out prompts. Contact and
/// collision are means over vertices while the IBS term is a sum over points,
/// so the means need far larger weights to hold their own.
pub const TUNED_WEIGHTS: LossWeights = LossWeights { contact: 100.0, collision: 500.0, ibs: 1.0, reg: 0.1, hh: 5.0 };

impl Default for PipelineConfig {
    fn default() -> Self {
        let optimize = OptimizeConfig { weights: TUNED_WEIGHTS, ..OptimizeConfig::default() };
        Self { optimize, accept_threshold: 0.05, contact_eps: 0.02, gsg: GsgThresholds::default() }
    }
}

/// Everything a CLI run needs, read from one TOML file. Missing tables and
/// keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    /// Cluster count of the diversity metric.
    pub diversity_k: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if cfg.diversity_k == 0 {
            cfg.diversity_k = 8;
        }
        cfg.generator.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.pipeline.optimize.weights.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.pipeline, PipelineConfig::default());
        assert_eq!(cfg.diversity_k, 8);
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides_and_bad_values() {
        let cfg = RunConfig::parse("[pipeline]\naccept_threshold = 0.5\n[train]\nepochs = 2\n").unwrap();
        assert_eq!(cfg.pipeline.accept_threshold, 0.5);
        assert_eq!(cfg.train.epochs, 2);
        assert!(RunConfig::parse("[pipeline.optimize.weights]\ncontact = -1.0\n").is_err());
        assert!(RunConfig::parse("[train]\nepochs = \"x\"\n").is_err());
    }
}
