// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON run configuration.
//!
//! Unknown keys are rejected at every level. Only `mode` and `instance`
//! are required; everything else has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::BanditInstance;
use crate::error::{Error, Result};
use crate::latent::DEFAULT_INTENSITIES;
use crate::policy::Policy;
use crate::steering::ContrastSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Population,
    Empirical,
    Latent,
    Verify,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Grpo,
    Vspo,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Grpo => "grpo",
            Method::Vspo => "vspo",
        }
    }
}

/// Built-in instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// `x = (1.0, 0.8, 0.2)`, `y = (0, 1, 1)`, `alpha = 1`, uniform start.
    #[serde(alias = "e1")]
    E1,
    /// `x = (0.6, 0.4, 0.5)`, `y = (0, 0, 1)`, `alpha = 1`, start `(0.3, 0.2, 0.5)`.
    #[serde(alias = "e3")]
    E3,
    /// `x = (1, 1, 0.3, 0.3)`, `y = (0, 1, 0, 1)`, `alpha = 1`, uniform start.
    /// Behavior can improve without costing primary reward.
    #[serde(rename = "separable")]
    Separable,
}

impl Preset {
    pub fn instance(self) -> BanditInstance {
        let (x, y) = match self {
            Preset::E1 => (vec![1.0, 0.8, 0.2], vec![0.0, 1.0, 1.0]),
            Preset::E3 => (vec![0.6, 0.4, 0.5], vec![0.0, 0.0, 1.0]),
            Preset::Separable => (vec![1.0, 1.0, 0.3, 0.3], vec![0.0, 1.0, 0.0, 1.0]),
        };
        BanditInstance::new(x, y, 1.0).expect("presets are valid instances")
    }

    pub fn initial_policy(self) -> Policy {
        match self {
            Preset::E3 => Policy::new(vec![0.3, 0.2, 0.5]).expect("valid preset policy"),
            other => Policy::uniform(other.instance().arm_count()).expect("at least two arms"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::E1 => "E1",
            Preset::E3 => "E3",
            Preset::Separable => "separable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRef {
    pub preset: Preset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInstance {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: f64,
}

/// `{"preset": "E3"}` or `{"x": [...], "y": [...], "alpha": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Preset(PresetRef),
    Explicit(ExplicitInstance),
}

impl InstanceSpec {
    pub fn preset(&self) -> Option<Preset> {
        match self {
            InstanceSpec::Preset(p) => Some(p.preset),
            InstanceSpec::Explicit(_) => None,
        }
    }

    pub fn build(&self) -> Result<BanditInstance> {
        match self {
            InstanceSpec::Preset(p) => Ok(p.preset.instance()),
            InstanceSpec::Explicit(e) => BanditInstance::new(e.x.clone(), e.y.clone(), e.alpha),
        }
    }
}

/// Settings of the lemma-verification campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Sampled groups per (instance, G, method, seed) configuration.
    pub groups: usize,
    pub seeds: Vec<u64>,
    pub presets: Vec<Preset>,
    pub group_sizes: Vec<usize>,
    /// Random configurations for the exact identities.
    pub identity_configs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            groups: 200_000,
            seeds: vec![1, 2, 3],
            presets: vec![Preset::E1, Preset::E3],
            group_sizes: vec![2, 4, 8],
            identity_configs: 1000,
        }
    }
}

/// Settings of the latent-steering runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatentConfig {
    pub hidden_dim: usize,
    /// Strength of the planted behavior direction.
    pub axis: f64,
    /// Lean of the start token toward the low-`y` arms.
    pub start_bias: f64,
    pub intensities: Vec<f64>,
    pub behavior_weight: f64,
    pub normalize: bool,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub kl_weight: f64,
    pub iterations: usize,
    pub epochs: usize,
    /// Independent runs, each with its own initialization and sampling stream.
    pub seeds: usize,
    /// Intensities `b` at which the mixture deviation is audited; each is
    /// compared against `b / 2`.
    pub audit_intensities: Vec<f64>,
    /// When set, the median gain in unsteered `E[y]` must reach this value.
    pub min_behavior_gain: Option<f64>,
    /// When set, the median drop in unsteered `E[x]` may not exceed this value.
    pub max_primary_loss: Option<f64>,
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 8,
            axis: 2.0,
            start_bias: 1.0,
            intensities: DEFAULT_INTENSITIES.to_vec(),
            behavior_weight: 2.0,
            normalize: true,
            learning_rate: 0.1,
            clip_ratio: 0.2,
            kl_weight: 0.0,
            iterations: 1000,
            epochs: 1,
            seeds: 20,
            audit_intensities: vec![0.1, 0.05],
            min_behavior_gain: None,
            max_primary_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub method: Method,
    pub instance: InstanceSpec,
    /// Defaults to the preset's start, or uniform for explicit instances.
    #[serde(default)]
    pub initial_policy: Option<Vec<f64>>,
    #[serde(default = "RunConfig::default_contrast")]
    pub contrast: ContrastSpec,
    #[serde(default = "RunConfig::default_eta")]
    pub eta: f64,
    #[serde(default = "RunConfig::default_group_size")]
    pub group_size: usize,
    #[serde(default = "RunConfig::default_eps")]
    pub eps_target: f64,
    #[serde(default = "RunConfig::default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunConfig::default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub latent: LatentConfig,
}

impl RunConfig {
    fn default_contrast() -> ContrastSpec {
        ContrastSpec::TwoSidedSplit
    }

    fn default_eta() -> f64 {
        1.0
    }

    fn default_group_size() -> usize {
        2
    }

    fn default_eps() -> f64 {
        0.01
    }

    fn default_max_iterations() -> usize {
        1000
    }

    fn default_replications() -> usize {
        1
    }

    /// A config for `mode` on `instance` with every other field at its default.
    pub fn new(mode: Mode, instance: InstanceSpec) -> Self {
        Self {
            mode,
            method: Method::default(),
            instance,
            initial_policy: None,
            contrast: Self::default_contrast(),
            eta: Self::default_eta(),
            group_size: Self::default_group_size(),
            eps_target: Self::default_eps(),
            max_iterations: Self::default_max_iterations(),
            seed: 0,
            replications: Self::default_replications(),
            verify: VerifyConfig::default(),
            latent: LatentConfig::default(),
        }
    }

    pub fn preset(mode: Mode, preset: Preset) -> Self {
        Self::new(mode, InstanceSpec::Preset(PresetRef { preset }))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks ranges and that the instance and initial policy are valid.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be finite and nonnegative, got {}", self.eta));
        }
        if self.group_size < 2 {
            return bad(format!("group_size must be at least 2, got {}", self.group_size));
        }
        if self.method == Method::Vspo && self.group_size % 2 != 0 {
            return bad(format!("vspo needs an even group_size, got {}", self.group_size));
        }
        if !(self.eps_target > 0.0 && self.eps_target.is_finite()) {
            return bad(format!("eps_target must be positive, got {}", self.eps_target));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        let v = &self.verify;
        if v.seeds.is_empty() || v.presets.is_empty() || v.group_sizes.is_empty() {
            return bad("verify.seeds, verify.presets and verify.group_sizes must be nonempty".into());
        }
        if let Some(g) = v.group_sizes.iter().find(|&&g| g < 2 || g % 2 != 0) {
            return bad(format!("verify.group_sizes must be even and >= 2, got {g}"));
        }
        if v.groups < 2 {
            return bad(format!("verify.groups must be at least 2, got {}", v.groups));
        }
        let l = &self.latent;
        if l.hidden_dim == 0 || l.seeds == 0 || l.epochs == 0 {
            return bad("latent.hidden_dim, latent.seeds and latent.epochs must be positive".into());
        }
        if l.intensities.len() < 2 {
            return bad("latent.intensities needs at least 2 entries".into());
        }
        if l.audit_intensities.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return bad("latent.audit_intensities must be positive".into());
        }
        let instance = self.instance.build().map_err(|e| Error::Config(e.to_string()))?;
        self.initial_policy_for(&instance)
            .map_err(|e| Error::Config(format!("initial_policy: {e}")))?;
        Ok(())
    }

    pub fn build_instance(&self) -> Result<BanditInstance> {
        self.instance.build()
    }

    /// The configured start, strictly positive and matching the instance.
    pub fn initial_policy_for(&self, instance: &BanditInstance) -> Result<Policy> {
        let policy = match (&self.initial_policy, self.instance.preset()) {
            (Some(p), _) => Policy::new(p.clone())?,
            (None, Some(preset)) => preset.initial_policy(),
            (None, None) => Policy::uniform(instance.arm_count())?,
        };
        if policy.arm_count() != instance.arm_count() {
            return Err(Error::DimensionMismatch {
                expected: instance.arm_count(),
                got: policy.arm_count(),
            });
        }
        Ok(policy)
    }
}
