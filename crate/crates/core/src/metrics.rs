//! Run records, regret and reward accounting.
//!
//! Models adapt during a run, so "the expected reward of the best model" is
//! ambiguous. Each regret comes in two variants: *static* evaluates every
//! step against the initial skills, *dynamic* against the skills in force
//! when the step was taken.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::ArmId;
use crate::environment::{predict_at, InstanceSampler, PassageRange};
use crate::error::{Error, Result};
use crate::feedback::span_f1;
use crate::harness::PolicyKind;
use crate::index::argmax_first;

/// One step (one batch) of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub step: u64,
    pub chosen_i: ArmId,
    /// Second duel member; `None` for single-arm policies.
    pub chosen_j: Option<ArmId>,
    pub rewards_i: Vec<u8>,
    /// Empty for single-arm policies.
    pub rewards_j: Vec<u8>,
    /// Model skills after this step's update.
    pub skills: Vec<f64>,
    pub static_regret: f64,
    pub dynamic_regret: Option<f64>,
    /// Labels changed by the noise channel.
    pub corrupted: u32,
}

impl StepRecord {
    pub fn batch_size(&self) -> usize {
        self.rewards_i.len()
    }

    pub fn batch_reward_i(&self) -> u64 {
        self.rewards_i.iter().map(|&r| u64::from(r)).sum()
    }

    pub fn batch_reward_j(&self) -> Option<u64> {
        self.chosen_j.map(|_| self.rewards_j.iter().map(|&r| u64::from(r)).sum())
    }
}

/// Held-out evaluation of the currently returned model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub instances_seen: u64,
    pub best_arm: ArmId,
    /// Mean index-wise F1 over the probe set.
    pub mean_f1: f64,
}

/// Complete, replayable log of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub seed: u64,
    pub policy: PolicyKind,
    pub initial_skills: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub probes: Vec<ProbePoint>,
    pub best_arm: ArmId,
    /// Ledger means at the end of the run (per arm).
    pub final_means: Vec<f64>,
    /// Instances for which a preferred span was forwarded to adaptation.
    pub teacher_instances: u64,
}

impl RunRecord {
    pub fn num_sources(&self) -> usize {
        self.initial_skills.len()
    }

    /// Skills after the last step (initial skills for an empty run).
    pub fn final_skills(&self) -> &[f64] {
        self.steps.last().map_or(&self.initial_skills, |s| &s.skills)
    }

    pub fn best_arm_skill(&self) -> f64 {
        self.final_skills()[self.best_arm.0]
    }

    pub fn instances(&self) -> usize {
        self.steps.iter().map(StepRecord::batch_size).sum()
    }

    pub fn static_regret(&self) -> f64 {
        self.steps.iter().map(|s| s.static_regret).sum()
    }

    pub fn dynamic_regret(&self) -> Option<f64> {
        self.steps.iter().map(|s| s.dynamic_regret).sum()
    }

    /// Expected-reward rows frozen at the initial skills.
    pub fn static_expectations(&self) -> Vec<Vec<f64>> {
        vec![self.initial_skills.clone(); self.steps.len()]
    }

    /// Expected-reward rows at the skills in force before each step.
    pub fn dynamic_expectations(&self) -> Vec<Vec<f64>> {
        std::iter::once(&self.initial_skills)
            .chain(self.steps.iter().map(|s| &s.skills))
            .take(self.steps.len())
            .cloned()
            .collect()
    }
}

/// Shortfall of one single-arm choice: `max(expected) - expected[arm]`.
pub fn mab_step_regret(expected: &[f64], arm: ArmId) -> f64 {
    let best = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best - expected[arm.0]
}

/// Cumulative single-arm regret `sum_t [mu*_t - mu_t(a_t)]`.
///
/// `expected[t][k]` is arm `k`'s expected reward at step `t`.
pub fn mab_regret(steps: &[StepRecord], expected: &[Vec<f64>]) -> Result<f64> {
    if expected.len() != steps.len() {
        return Err(Error::contract(format!(
            "{} expectation rows for {} steps",
            expected.len(),
            steps.len()
        )));
    }
    let mut total = 0.0;
    for (step, row) in steps.iter().zip(expected) {
        if step.chosen_i.0 >= row.len() {
            return Err(Error::contract(format!("no expectation for arm {} at step {}", step.chosen_i, step.step)));
        }
        total += mab_step_regret(row, step.chosen_i);
    }
    Ok(total)
}

/// Cumulative dueling regret `sum_t [eps(a*, a_i) + eps(a*, a_j)]`,
/// `eps(a, b) = P(a > b) - 1/2`.
///
/// `beats[t][k]` is the probability that the best arm at step `t` is
/// preferred over arm `k`. The best arm's own entry must be 1/2.
pub fn madb_regret(steps: &[StepRecord], beats: &[Vec<f64>]) -> Result<f64> {
    if beats.len() != steps.len() {
        return Err(Error::contract(format!("{} preference rows for {} steps", beats.len(), steps.len())));
    }
    let mut total = 0.0;
    for (step, row) in steps.iter().zip(beats) {
        let j = step
            .chosen_j
            .ok_or_else(|| Error::contract(format!("step {} has no second duel member", step.step)))?;
        for arm in [step.chosen_i, j] {
            let p = *row
                .get(arm.0)
                .ok_or_else(|| Error::contract(format!("no preference for arm {arm} at step {}", step.step)))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::contract(format!("preference probability {p} outside [0, 1]")));
            }
            total += p - 0.5;
        }
    }
    Ok(total)
}

/// Sum of every reward granted in the run, across steps and models.
pub fn overall_reward(run: &RunRecord) -> u64 {
    run.steps
        .iter()
        .map(|s| s.batch_reward_i() + s.batch_reward_j().unwrap_or(0))
        .sum()
}

/// Outcome frequencies of a duel between two independent predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEstimate {
    /// `P(F1_i > F1_j)`
    pub win: f64,
    /// `P(F1_j > F1_i)`
    pub loss: f64,
    pub tie: f64,
}

/// Monte Carlo estimate of how often a model of skill `skill_i` is strictly
/// preferred over one of skill `skill_j` on a shared random instance.
pub fn estimate_preference(
    skill_i: f64,
    skill_j: f64,
    perturb_width: usize,
    passages: PassageRange,
    samples: usize,
    seed: u64,
) -> Result<PreferenceEstimate> {
    if samples == 0 {
        return Err(Error::contract("at least one Monte Carlo sample is required"));
    }
    if perturb_width == 0 {
        return Err(Error::contract("perturb width must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = InstanceSampler::new(passages);
    let (mut win, mut loss) = (0usize, 0usize);
    for _ in 0..samples {
        let inst = sampler.sample(&mut rng);
        let a = span_f1(&predict_at(skill_i, perturb_width, &inst, &mut rng), &inst.gold);
        let b = span_f1(&predict_at(skill_j, perturb_width, &inst, &mut rng), &inst.gold);
        if a > b {
            win += 1;
        } else if b > a {
            loss += 1;
        }
    }
    let n = samples as f64;
    Ok(PreferenceEstimate {
        win: win as f64 / n,
        loss: loss as f64 / n,
        tie: (samples - win - loss) as f64 / n,
    })
}

/// `P(F1_i > F1_j)` by Monte Carlo.
pub fn preference_probability(
    skill_i: f64,
    skill_j: f64,
    perturb_width: usize,
    passages: PassageRange,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    estimate_preference(skill_i, skill_j, perturb_width, passages, samples, seed).map(|e| e.win)
}

/// Duel outcome probabilities as a function of skills.
///
/// An exact answer beats any off-target one, two exact answers tie, and two
/// off-target answers tie with probability `perturbed_tie`, which is
/// measured once by Monte Carlo (by exchangeability each side then wins
/// half of the rest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub perturbed_tie: f64,
}

impl PreferenceModel {
    pub fn estimate(perturb_width: usize, passages: PassageRange, samples: usize, seed: u64) -> Result<Self> {
        let e = estimate_preference(0.0, 0.0, perturb_width, passages, samples, seed)?;
        Ok(PreferenceModel { perturbed_tie: e.tie })
    }

    /// `P(a > b)`, strict.
    pub fn strict(&self, skill_a: f64, skill_b: f64) -> f64 {
        let both_wrong = (1.0 - skill_a) * (1.0 - skill_b);
        skill_a * (1.0 - skill_b) + both_wrong * (1.0 - self.perturbed_tie) / 2.0
    }

    pub fn tie(&self, skill_a: f64, skill_b: f64) -> f64 {
        skill_a * skill_b + (1.0 - skill_a) * (1.0 - skill_b) * self.perturbed_tie
    }

    /// Preference probability with ties split evenly, so that
    /// `beats(a, b) + beats(b, a) == 1`.
    pub fn beats(&self, skill_a: f64, skill_b: f64) -> f64 {
        self.strict(skill_a, skill_b) + self.tie(skill_a, skill_b) / 2.0
    }

    /// Row of `P(a* > k)` for every arm, where `a*` is the highest-skill
    /// arm (lowest index on ties) and its own entry is exactly 1/2.
    pub fn beats_row(&self, skills: &[f64]) -> Vec<f64> {
        let best = argmax_first(skills.iter().copied()).expect("at least one arm");
        skills
            .iter()
            .enumerate()
            .map(|(k, &s)| if k == best { 0.5 } else { self.beats(skills[best], s) })
            .collect()
    }
}

/// Dueling regret of one step given the skills in force.
pub fn madb_step_regret(model: &PreferenceModel, skills: &[f64], i: ArmId, j: ArmId) -> f64 {
    let row = model.beats_row(skills);
    (row[i.0] - 0.5) + (row[j.0] - 0.5)
}
