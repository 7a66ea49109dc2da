use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::artifact::read_json;
use crate::cluster::ClusterConfig;
use crate::embed::EmbedConfig;
use crate::error::{Error, Result};
use crate::matching::MatchConfig;
use crate::prune::PruneConfig;
use crate::registration::RegistrationConfig;
use crate::synth::{GeneratorConfig, RenderConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluate every `frame_stride`-th test frame.
    pub frame_stride: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { frame_stride: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationOnlyConfig {
    pub min_cosine: f64,
    pub min_precision_recall: f64,
}

impl Default for RegistrationOnlyConfig {
    fn default() -> Self {
        Self { min_cosine: 0.9, min_precision_recall: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub generator: GeneratorConfig,
    pub render: RenderConfig,
    pub phi1: EmbedConfig,
    pub matching: MatchConfig,
    pub registration: RegistrationConfig,
    pub prune: PruneConfig,
    /// Fields left out fall back to the stage-2 defaults, not to
    /// `EmbedConfig::default()`.
    #[serde(deserialize_with = "phi2_overlay")]
    pub phi2: EmbedConfig,
    pub cluster: ClusterConfig,
    pub eval: EvalConfig,
    pub registration_only: RegistrationOnlyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("run"),
            generator: GeneratorConfig::default(),
            render: RenderConfig::default(),
            phi1: EmbedConfig::default(),
            matching: MatchConfig::default(),
            registration: RegistrationConfig::default(),
            prune: PruneConfig::default(),
            phi2: phi2_defaults(),
            cluster: ClusterConfig::default(),
            eval: EvalConfig::default(),
            registration_only: RegistrationOnlyConfig::default(),
        }
    }
}

fn phi2_defaults() -> EmbedConfig {
    EmbedConfig { epochs: 200, lr: 2.0, tau: 0.5 }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedOverrides {
    epochs: Option<usize>,
    lr: Option<f64>,
    tau: Option<f64>,
}

fn phi2_overlay<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<EmbedConfig, D::Error> {
    let o = EmbedOverrides::deserialize(d)?;
    let base = phi2_defaults();
    Ok(EmbedConfig { epochs: o.epochs.unwrap_or(base.epochs), lr: o.lr.unwrap_or(base.lr), tau: o.tau.unwrap_or(base.tau) })
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.render.validate()?;
        self.phi1.validate()?;
        self.matching.validate()?;
        self.registration.validate()?;
        self.prune.validate()?;
        self.phi2.validate()?;
        self.cluster.validate()?;
        if self.eval.frame_stride == 0 {
            return Err(Error::InvalidConfig("eval.frame_stride must be >= 1".into()));
        }
        let r = &self.registration_only;
        if !(-1.0..=1.0).contains(&r.min_cosine) || !(0.0..=1.0).contains(&r.min_precision_recall) {
            return Err(Error::InvalidConfig("registration_only thresholds out of range".into()));
        }
        Ok(())
    }
}
