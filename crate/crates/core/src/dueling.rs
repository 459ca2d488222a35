//! K-armed dueling bandits with Co-UCB.
//!
//! Every step a pair `(i, j)`, `i < j`, is chosen by
//! `(mean_i + mean_j) / 2 + sqrt(2 ln N / n_ij)`. Both models answer each
//! instance of the batch, the user prefers one answer (or neither), and the
//! per-model dueling means `mean_i = sum_k r_ik / sum_k n_ik` are updated.
//! The preferred answer is then used to update both models (see
//! [`crate::environment::collaborative_adapt`]).

use serde::{Deserialize, Serialize};

use crate::bandit::ArmId;
use crate::error::{Error, Result};
use crate::feedback::{make_preference, preference_to_rewards, SpanPrediction};
use crate::index::{argmax_first, exploration_bonus};

/// An unordered pair of distinct arms, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairId {
    i: ArmId,
    j: ArmId,
}

impl PairId {
    /// Canonical pair; `i` must be strictly below `j`.
    pub fn new(i: ArmId, j: ArmId) -> Result<Self> {
        if i >= j {
            return Err(Error::contract(format!("pair ({i}, {j}) is not canonical (need i < j)")));
        }
        Ok(PairId { i, j })
    }

    pub fn i(&self) -> ArmId {
        self.i
    }

    pub fn j(&self) -> ArmId {
        self.j
    }
}

/// How the instance counter `N` moves after a duel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalCountRule {
    /// `N <- N + |B|`, as in single-arm UCB.
    #[default]
    Accumulate,
    /// `N <- |B|`, taken literally from the published pseudo-code.
    LastBatch,
}

/// Co-UCB statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelLedger {
    mean_duel_reward: Vec<f64>,
    /// Row-major `K x K`, symmetric, zero diagonal.
    pair_count: Vec<u64>,
    reward_sum: Vec<u64>,
    total_count: u64,
    rule: TotalCountRule,
}

impl DuelLedger {
    pub fn new(num_arms: usize) -> Result<Self> {
        Self::with_rule(num_arms, TotalCountRule::Accumulate)
    }

    pub fn with_rule(num_arms: usize, rule: TotalCountRule) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::contract(format!("dueling needs at least two arms, got {num_arms}")));
        }
        Ok(DuelLedger {
            mean_duel_reward: vec![0.0; num_arms],
            pair_count: vec![0; num_arms * num_arms],
            reward_sum: vec![0; num_arms],
            total_count: 0,
            rule,
        })
    }

    /// Rebuilds a ledger (accumulating rule) from a pair-count matrix and
    /// per-arm reward sums. Means are derived, `N` is the number of duelled
    /// instances.
    pub fn from_state(pair_count: Vec<Vec<u64>>, reward_sum: Vec<u64>) -> Result<Self> {
        let k = reward_sum.len();
        let mut ledger = Self::new(k)?;
        if pair_count.len() != k || pair_count.iter().any(|row| row.len() != k) {
            return Err(Error::contract("pair-count matrix must be K x K"));
        }
        for a in 0..k {
            if pair_count[a][a] != 0 {
                return Err(Error::contract(format!("arm {a} cannot duel itself")));
            }
            for b in 0..k {
                if pair_count[a][b] != pair_count[b][a] {
                    return Err(Error::contract(format!("pair counts ({a}, {b}) are not symmetric")));
                }
                ledger.pair_count[a * k + b] = pair_count[a][b];
                if a < b {
                    ledger.total_count += pair_count[a][b];
                }
            }
        }
        for (a, &r) in reward_sum.iter().enumerate() {
            let played = ledger.row_count(ArmId(a));
            if r > played {
                return Err(Error::contract(format!("arm {a} has {r} rewards from {played} duels")));
            }
            ledger.reward_sum[a] = r;
            ledger.mean_duel_reward[a] = if played == 0 { 0.0 } else { r as f64 / played as f64 };
        }
        Ok(ledger)
    }

    pub fn num_arms(&self) -> usize {
        self.mean_duel_reward.len()
    }

    pub fn rule(&self) -> TotalCountRule {
        self.rule
    }

    pub fn mean_duel_reward(&self, arm: ArmId) -> f64 {
        self.mean_duel_reward[arm.0]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean_duel_reward
    }

    pub fn pair_count(&self, a: ArmId, b: ArmId) -> u64 {
        self.pair_count[a.0 * self.num_arms() + b.0]
    }

    /// `sum_k n_{arm,k}`: instances this arm has duelled on.
    pub fn row_count(&self, arm: ArmId) -> u64 {
        let k = self.num_arms();
        self.pair_count[arm.0 * k..(arm.0 + 1) * k].iter().sum()
    }

    pub fn reward_sum(&self, arm: ArmId) -> u64 {
        self.reward_sum[arm.0]
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    fn check_pair(&self, pair: PairId) -> Result<()> {
        if pair.j.0 >= self.num_arms() {
            return Err(Error::contract(format!(
                "pair ({}, {}) out of range for {} arms",
                pair.i,
                pair.j,
                self.num_arms()
            )));
        }
        Ok(())
    }

    fn pair_index(&self, pair: PairId) -> f64 {
        let avg = (self.mean_duel_reward[pair.i.0] + self.mean_duel_reward[pair.j.0]) / 2.0;
        avg + exploration_bonus(self.total_count, self.pair_count(pair.i, pair.j))
    }

    /// `(mean_i + mean_j)/2 + sqrt(2 ln N / n_ij)`; `+inf` for an untried pair.
    pub fn co_ucb_index(&self, pair: PairId) -> Result<f64> {
        self.check_pair(pair)?;
        Ok(self.pair_index(pair))
    }

    /// All canonical pairs in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = PairId> + '_ {
        let k = self.num_arms();
        (0..k).flat_map(move |i| {
            (i + 1..k).map(move |j| PairId {
                i: ArmId(i),
                j: ArmId(j),
            })
        })
    }

    /// Pair with the largest index; ties go to the lexicographically first.
    pub fn select_pair(&self) -> PairId {
        let pairs: Vec<PairId> = self.pairs().collect();
        let pos = argmax_first(pairs.iter().map(|&p| self.pair_index(p))).expect("at least one pair");
        pairs[pos]
    }

    /// Folds one duel's one-hot rewards into the ledger.
    pub fn update_pair(&mut self, pair: PairId, rewards_i: &[u8], rewards_j: &[u8]) -> Result<()> {
        self.check_pair(pair)?;
        validate_duel_rewards(rewards_i, rewards_j)?;
        let batch = rewards_i.len() as u64;
        let k = self.num_arms();
        let (i, j) = (pair.i.0, pair.j.0);

        let hits_i: u64 = rewards_i.iter().map(|&r| u64::from(r)).sum();
        let seen_i = self.row_count(pair.i);
        self.mean_duel_reward[i] =
            (self.mean_duel_reward[i] * seen_i as f64 + hits_i as f64) / (seen_i + batch) as f64;
        self.pair_count[i * k + j] += batch;

        // n_ji is still the old value here, so this is sum_k n_jk before the duel
        let hits_j: u64 = rewards_j.iter().map(|&r| u64::from(r)).sum();
        let seen_j = self.row_count(pair.j);
        self.mean_duel_reward[j] =
            (self.mean_duel_reward[j] * seen_j as f64 + hits_j as f64) / (seen_j + batch) as f64;
        self.pair_count[j * k + i] += batch;

        self.reward_sum[i] += hits_i;
        self.reward_sum[j] += hits_j;
        self.total_count = match self.rule {
            TotalCountRule::Accumulate => self.total_count + batch,
            TotalCountRule::LastBatch => batch,
        };
        Ok(())
    }

    /// The model kept after adaptation:
    /// `argmax_j mean_j + sqrt(2 ln(2N) / sum_k n_jk)`, lowest index on ties.
    pub fn best_model(&self) -> ArmId {
        let horizon = 2 * self.total_count;
        let k = argmax_first(
            (0..self.num_arms())
                .map(|a| self.mean_duel_reward[a] + exploration_bonus(horizon, self.row_count(ArmId(a)))),
        )
        .expect("at least two arms");
        ArmId(k)
    }
}

fn validate_duel_rewards(rewards_i: &[u8], rewards_j: &[u8]) -> Result<()> {
    if rewards_i.is_empty() {
        return Err(Error::contract("reward batch is empty"));
    }
    if rewards_i.len() != rewards_j.len() {
        return Err(Error::contract(format!(
            "reward vectors differ in length ({} vs {})",
            rewards_i.len(),
            rewards_j.len()
        )));
    }
    for (n, (&a, &b)) in rewards_i.iter().zip(rewards_j).enumerate() {
        if a > 1 || b > 1 {
            return Err(Error::contract(format!("instance {n}: rewards must be 0 or 1")));
        }
        if a + b > 1 {
            return Err(Error::contract(format!("instance {n}: both duel members rewarded")));
        }
    }
    Ok(())
}

/// One-hot duel rewards from two quality scores: strictly higher wins.
pub fn preference_rewards(score_i: f64, score_j: f64) -> (u8, u8) {
    preference_to_rewards(make_preference(score_i, score_j))
}

/// The preferred span of an instance, or `None` when neither was preferred
/// (such instances carry zero weight in the joint update).
pub fn combine_predictions(
    pred_i: SpanPrediction,
    pred_j: SpanPrediction,
    r_i: u8,
    r_j: u8,
) -> Result<Option<SpanPrediction>> {
    match (r_i, r_j) {
        (0, 0) => Ok(None),
        (1, 0) => Ok(Some(pred_i)),
        (0, 1) => Ok(Some(pred_j)),
        _ => Err(Error::contract(format!("rewards ({r_i}, {r_j}) are not one-hot"))),
    }
}
