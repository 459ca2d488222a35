use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dueling::TotalCountRule;
use crate::environment::{AdaptRule, DomainProfile, PassageRange, SyntheticModel};
use crate::error::{Error, Result};
use crate::feedback::{NoiseChannel, EQUAL_SPLIT_TRANSITION};

/// Which selection policy drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
#[cfg_attr(feature = "cli", clap(rename_all = "snake_case"))]
pub enum PolicyKind {
    /// UCB over single models, exact-match feedback.
    Ucb,
    /// UCB over single models, preference between the model's own top-2 spans.
    UcbPreference,
    /// Co-UCB over model pairs with the collaborative update.
    CoUcb,
    /// Co-UCB where each model learns only from its own wins.
    CoUcbNoCollab,
}

impl PolicyKind {
    pub fn is_dueling(self) -> bool {
        matches!(self, PolicyKind::CoUcb | PolicyKind::CoUcbNoCollab)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ucb => "ucb",
            PolicyKind::UcbPreference => "ucb_preference",
            PolicyKind::CoUcb => "co_ucb",
            PolicyKind::CoUcbNoCollab => "co_ucb_no_collab",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub noise_rate: f64,
    pub transition: [[f64; 3]; 3],
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            noise_rate: 0.0,
            transition: EQUAL_SPLIT_TRANSITION,
        }
    }
}

impl NoiseConfig {
    pub fn channel(&self) -> Result<NoiseChannel> {
        NoiseChannel::new(self.noise_rate, self.transition)
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policy: PolicyKind,
    pub profile: DomainProfile,
    pub learning_gain: f64,
    pub perturb_width: usize,
    pub top2_degradation: f64,
    pub passage: PassageRange,
    pub noise: NoiseConfig,
    /// Update only the selection policy; model skills stay frozen.
    pub policy_only: bool,
    pub total_count_rule: TotalCountRule,
    pub adapt_rule: AdaptRule,
    /// Also track regret against the current (adapted) skills.
    pub dynamic_regret: bool,
    /// Probe the returned model every this many instances (0 disables).
    pub probe_every: usize,
    pub probe_size: usize,
    /// Monte Carlo samples for the off-target tie rate used by dueling regret.
    pub preference_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            policy: PolicyKind::CoUcb,
            profile: DomainProfile::default(),
            learning_gain: 0.01,
            perturb_width: 3,
            top2_degradation: 0.5,
            passage: PassageRange::default(),
            noise: NoiseConfig::default(),
            policy_only: false,
            total_count_rule: TotalCountRule::Accumulate,
            adapt_rule: AdaptRule::TeacherAware,
            dynamic_regret: true,
            probe_every: 2_000,
            probe_size: 1_000,
            preference_samples: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn num_sources(&self) -> usize {
        self.profile.num_sources()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.policy.is_dueling() && self.num_sources() < 2 {
            return Err(Error::config(format!(
                "{} needs at least two source models, got {}",
                self.policy,
                self.num_sources()
            )));
        }
        PassageRange::new(self.passage.min, self.passage.max)?;
        SyntheticModel::new(0.5, self.learning_gain, self.perturb_width, self.top2_degradation)?;
        self.noise.channel()?;
        if self.probe_every > 0 && self.probe_size == 0 {
            return Err(Error::config("probe size must be positive when probing is enabled"));
        }
        if self.preference_samples == 0 {
            return Err(Error::config("preference samples must be positive"));
        }
        Ok(())
    }

    /// Short hex digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        short_hash(json.as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn hash_u64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
