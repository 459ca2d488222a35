//! K-armed bandit learning with UCB.
//!
//! Each arm is a source model. Per step one arm is chosen by
//! `mean + sqrt(2 ln N / n)`, it is shown a batch, and its running mean is
//! updated with the batch's binary rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{make_preference, preference_to_rewards, span_f1, GoldSpan, SpanPrediction};
use crate::index::{argmax_first, exploration_bonus};

/// Index of a source model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmId(pub usize);

impl ArmId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ArmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Running UCB statistics over `K` arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabLedger {
    mean_reward: Vec<f64>,
    pull_count: Vec<u64>,
    total_count: u64,
}

impl MabLedger {
    pub fn new(num_arms: usize) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::contract("a bandit ledger needs at least one arm"));
        }
        Ok(MabLedger {
            mean_reward: vec![0.0; num_arms],
            pull_count: vec![0; num_arms],
            total_count: 0,
        })
    }

    /// Rebuilds a ledger from explicit statistics, checking its invariants.
    pub fn from_state(mean_reward: Vec<f64>, pull_count: Vec<u64>) -> Result<Self> {
        if mean_reward.is_empty() || mean_reward.len() != pull_count.len() {
            return Err(Error::contract("means and counts must be non-empty and of equal length"));
        }
        for (k, (&m, &n)) in mean_reward.iter().zip(&pull_count).enumerate() {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::contract(format!("arm {k} mean {m} outside [0, 1]")));
            }
            if n == 0 && m != 0.0 {
                return Err(Error::contract(format!("arm {k} is unpulled but has mean {m}")));
            }
        }
        let total_count = pull_count.iter().sum();
        Ok(MabLedger {
            mean_reward,
            pull_count,
            total_count,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.mean_reward.len()
    }

    pub fn mean_reward(&self, arm: ArmId) -> f64 {
        self.mean_reward[arm.0]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean_reward
    }

    pub fn pull_count(&self, arm: ArmId) -> u64 {
        self.pull_count[arm.0]
    }

    pub fn pull_counts(&self) -> &[u64] {
        &self.pull_count
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    fn check(&self, arm: ArmId) -> Result<()> {
        if arm.0 >= self.num_arms() {
            return Err(Error::contract(format!(
                "arm {} out of range for {} arms",
                arm.0,
                self.num_arms()
            )));
        }
        Ok(())
    }

    /// `mean + sqrt(2 ln N / n)`; `+inf` for an unpulled arm.
    pub fn ucb_index(&self, arm: ArmId) -> Result<f64> {
        self.check(arm)?;
        Ok(self.index_unchecked(arm.0))
    }

    fn index_unchecked(&self, k: usize) -> f64 {
        self.mean_reward[k] + exploration_bonus(self.total_count, self.pull_count[k])
    }

    /// Arm with the largest UCB index, lowest index on ties.
    pub fn select_arm(&self) -> ArmId {
        let k = argmax_first((0..self.num_arms()).map(|k| self.index_unchecked(k)))
            .expect("ledger has at least one arm");
        ArmId(k)
    }

    /// Folds a batch of binary rewards for `arm` into its running mean.
    pub fn update_binary(&mut self, arm: ArmId, rewards: &[u8]) -> Result<()> {
        self.check(arm)?;
        if rewards.is_empty() {
            return Err(Error::contract("reward batch is empty"));
        }
        if let Some(bad) = rewards.iter().find(|&&r| r > 1) {
            return Err(Error::contract(format!("binary reward expected, got {bad}")));
        }
        // rewards are 0/1, so r·r is the number of ones
        let hits: u64 = rewards.iter().map(|&r| u64::from(r)).sum();
        let batch = rewards.len() as u64;
        let k = arm.0;
        let n = self.pull_count[k];
        self.mean_reward[k] = (self.mean_reward[k] * n as f64 + hits as f64) / (n + batch) as f64;
        self.pull_count[k] = n + batch;
        self.total_count += batch;
        Ok(())
    }

    /// The arm returned at the end of adaptation; same rule as [`select_arm`](Self::select_arm).
    pub fn best_arm(&self) -> ArmId {
        self.select_arm()
    }
}

/// Preference feedback between a model's own top-2 spans.
///
/// Scores both spans by index-wise F1 against `gold` and returns one-hot
/// `(reward_first, reward_second)`; equal scores give `(0, 0)`.
pub fn select_top2_prediction_feedback(
    pred_first: &SpanPrediction,
    pred_second: &SpanPrediction,
    gold: &GoldSpan,
) -> (u8, u8) {
    preference_to_rewards(make_preference(span_f1(pred_first, gold), span_f1(pred_second, gold)))
}
