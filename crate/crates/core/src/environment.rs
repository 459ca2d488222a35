//! Synthetic span-prediction task and adaptive source models.
//!
//! A source model is reduced to a single `skill`: the probability that it
//! emits the annotated span exactly. Off-target answers are the gold span with
//! both endpoints shifted by `1..=perturb_width` tokens, so their F1 is high
//! but below one and preference feedback stays informative.
//!
//! Fine-tuning on a batch is replaced by a convex skill step. Training
//! towards the annotated span raises skill by `gain·(k/B)·(1 - skill)`.
//! Under [`AdaptRule::TeacherAware`], training towards a wrong span lowers it
//! by `gain·(k/B)·skill`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{GoldSpan, Span, SpanPrediction};

/// One test instance: a passage of `passage_length` tokens with one annotated span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: u64,
    pub passage_length: usize,
    pub gold: GoldSpan,
}

/// Inclusive range of passage lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PassageRange {
    pub min: usize,
    pub max: usize,
}

impl PassageRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        // a one-token passage has no wrong answer to emit
        if min < 2 || min > max {
            return Err(Error::config(format!("passage range [{min}, {max}] must satisfy 2 <= min <= max")));
        }
        Ok(PassageRange { min, max })
    }
}

impl Default for PassageRange {
    fn default() -> Self {
        PassageRange { min: 20, max: 80 }
    }
}

/// Stream of synthetic instances. Randomness comes from the caller's source.
#[derive(Debug, Clone)]
pub struct InstanceSampler {
    range: PassageRange,
    next_id: u64,
}

impl InstanceSampler {
    pub fn new(range: PassageRange) -> Self {
        InstanceSampler { range, next_id: 0 }
    }

    pub fn range(&self) -> PassageRange {
        self.range
    }

    /// Uniform passage length, then a gold span uniform over all
    /// `L(L+1)/2` spans of that passage.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> TaskInstance {
        let passage_length = rng.gen_range(self.range.min..=self.range.max);
        let mut k = rng.gen_range(0..passage_length * (passage_length + 1) / 2);
        let mut start = 0;
        while k >= passage_length - start {
            k -= passage_length - start;
            start += 1;
        }
        let instance_id = self.next_id;
        self.next_id += 1;
        TaskInstance {
            instance_id,
            passage_length,
            gold: Span::ordered(start, start + k),
        }
    }
}

/// How a model's skill responds to training on a preferred span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptRule {
    /// Every preferred span counts as a correct label.
    Literal,
    /// Preferred spans that are not the annotated span pull skill down.
    #[default]
    TeacherAware,
}

/// Whether both duel members learn from the preferred span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Collaboration {
    Joint,
    /// Ablation: each model learns only from the instances it won.
    OwnWinsOnly,
}

/// Stand-in for a fine-tunable source model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    skill: f64,
    learning_gain: f64,
    perturb_width: usize,
    top2_degradation: f64,
}

impl SyntheticModel {
    pub fn new(skill: f64, learning_gain: f64, perturb_width: usize, top2_degradation: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&skill) {
            return Err(Error::config(format!("skill {skill} outside [0, 1]")));
        }
        if !(learning_gain > 0.0 && learning_gain < 1.0) {
            return Err(Error::config(format!("learning gain {learning_gain} outside (0, 1)")));
        }
        if perturb_width == 0 {
            return Err(Error::config("perturb width must be positive"));
        }
        if !(top2_degradation > 0.0 && top2_degradation <= 1.0) {
            return Err(Error::config(format!("top-2 degradation {top2_degradation} outside (0, 1]")));
        }
        Ok(SyntheticModel {
            skill,
            learning_gain,
            perturb_width,
            top2_degradation,
        })
    }

    pub fn skill(&self) -> f64 {
        self.skill
    }

    pub fn learning_gain(&self) -> f64 {
        self.learning_gain
    }

    pub fn perturb_width(&self) -> usize {
        self.perturb_width
    }

    pub fn top2_degradation(&self) -> f64 {
        self.top2_degradation
    }

    /// Gold with probability `skill`, otherwise a perturbed span.
    pub fn predict<R: Rng + ?Sized>(&self, instance: &TaskInstance, rng: &mut R) -> SpanPrediction {
        predict_at(self.skill, self.perturb_width, instance, rng)
    }

    /// Top-1 at `skill`, top-2 drawn independently at `skill·top2_degradation`.
    pub fn predict_top2<R: Rng + ?Sized>(
        &self,
        instance: &TaskInstance,
        rng: &mut R,
    ) -> (SpanPrediction, SpanPrediction) {
        let first = predict_at(self.skill, self.perturb_width, instance, rng);
        let second = predict_at(self.skill * self.top2_degradation, self.perturb_width, instance, rng);
        (first, second)
    }

    /// Reward-weighted update: `skill += gain·(rewards/batch)·(1 - skill)`.
    pub fn adapt(&mut self, reward_count: usize, batch_size: usize) -> Result<()> {
        self.adapt_with_teacher(reward_count, 0, batch_size)
    }

    /// Update from `gold_labels` instances trained towards the annotated
    /// span and `wrong_labels` instances trained towards some other span.
    pub fn adapt_with_teacher(&mut self, gold_labels: usize, wrong_labels: usize, batch_size: usize) -> Result<()> {
        if batch_size == 0 {
            return Err(Error::contract("batch size must be positive"));
        }
        if gold_labels + wrong_labels > batch_size {
            return Err(Error::contract(format!(
                "{} labelled instances in a batch of {batch_size}",
                gold_labels + wrong_labels
            )));
        }
        let up = self.learning_gain * gold_labels as f64 / batch_size as f64;
        let down = self.learning_gain * wrong_labels as f64 / batch_size as f64;
        // convex combination of 0, 1 and the old skill
        self.skill = (self.skill + up * (1.0 - self.skill) - down * self.skill).clamp(0.0, 1.0);
        Ok(())
    }
}

pub(crate) fn predict_at<R: Rng + ?Sized>(
    skill: f64,
    perturb_width: usize,
    instance: &TaskInstance,
    rng: &mut R,
) -> SpanPrediction {
    if rng.gen::<f64>() < skill {
        instance.gold
    } else {
        perturb(instance, perturb_width, rng)
    }
}

const PERTURB_ATTEMPTS: usize = 64;

/// A span different from gold: each endpoint moved by `±(1..=width)`,
/// clipped to the passage and reordered.
fn perturb<R: Rng + ?Sized>(instance: &TaskInstance, width: usize, rng: &mut R) -> SpanPrediction {
    let gold = instance.gold;
    let last = instance.passage_length - 1;
    let shift = |pos: usize, rng: &mut R| -> usize {
        let by = rng.gen_range(1..=width);
        if rng.gen::<bool>() {
            (pos + by).min(last)
        } else {
            pos.saturating_sub(by)
        }
    };
    for _ in 0..PERTURB_ATTEMPTS {
        let s = shift(gold.start(), rng);
        let e = shift(gold.end(), rng);
        let span = Span::ordered(s, e);
        if span != gold {
            return span;
        }
    }
    // clipping at both passage edges can make gold very likely; fall back to a neighbour
    if gold.end() < last {
        Span::ordered(gold.start(), gold.end() + 1)
    } else if gold.start() > 0 {
        Span::ordered(gold.start() - 1, gold.end())
    } else {
        Span::ordered(0, gold.end() - 1)
    }
}

/// One duel's feedback, per instance.
#[derive(Debug, Clone, Copy)]
pub struct DuelFeedback<'a> {
    pub rewards_i: &'a [u8],
    pub rewards_j: &'a [u8],
    /// Whether the preferred span equals the annotated span. Ignored on ties.
    pub teacher_is_gold: &'a [bool],
}

impl DuelFeedback<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.rewards_i.len();
        if n == 0 || self.rewards_j.len() != n || self.teacher_is_gold.len() != n {
            return Err(Error::contract("duel feedback vectors must be non-empty and of equal length"));
        }
        if self.rewards_i.iter().zip(self.rewards_j).any(|(&a, &b)| a > 1 || b > 1 || a + b > 1) {
            return Err(Error::contract("duel rewards must be one-hot or all zero per instance"));
        }
        Ok(())
    }

    /// `(gold, wrong)` label counts over instances selected by `take`.
    fn label_counts(&self, take: impl Fn(u8, u8) -> bool) -> (usize, usize) {
        let mut gold = 0;
        let mut wrong = 0;
        for ((&a, &b), &is_gold) in self.rewards_i.iter().zip(self.rewards_j).zip(self.teacher_is_gold) {
            if take(a, b) {
                if is_gold {
                    gold += 1;
                } else {
                    wrong += 1;
                }
            }
        }
        (gold, wrong)
    }
}

fn apply_counts(model: &mut SyntheticModel, (gold, wrong): (usize, usize), batch: usize, rule: AdaptRule) -> Result<()> {
    match rule {
        AdaptRule::Literal => model.adapt(gold + wrong, batch),
        AdaptRule::TeacherAware => model.adapt_with_teacher(gold, wrong, batch),
    }
}

/// Updates a duelled pair from the preferred spans.
///
/// With [`Collaboration::Joint`] every non-tie instance trains both models
/// on the preferred span, so the losing model learns from the winner. With
/// [`Collaboration::OwnWinsOnly`] each model trains only on the instances it won.
pub fn collaborative_adapt(
    model_i: &mut SyntheticModel,
    model_j: &mut SyntheticModel,
    feedback: DuelFeedback<'_>,
    collaboration: Collaboration,
    rule: AdaptRule,
) -> Result<()> {
    feedback.validate()?;
    let batch = feedback.rewards_i.len();
    match collaboration {
        Collaboration::Joint => {
            let counts = feedback.label_counts(|a, b| a + b == 1);
            apply_counts(model_i, counts, batch, rule)?;
            apply_counts(model_j, counts, batch, rule)
        }
        Collaboration::OwnWinsOnly => {
            apply_counts(model_i, feedback.label_counts(|a, _| a == 1), batch, rule)?;
            apply_counts(model_j, feedback.label_counts(|_, b| b == 1), batch, rule)
        }
    }
}

/// Updates a single model from its own rewarded spans (UCB, binary or top-2).
pub fn self_adapt(model: &mut SyntheticModel, rewards: &[u8], teacher_is_gold: &[bool], rule: AdaptRule) -> Result<()> {
    if rewards.is_empty() || rewards.len() != teacher_is_gold.len() {
        return Err(Error::contract("reward and teacher vectors must be non-empty and of equal length"));
    }
    let mut counts = (0, 0);
    for (&r, &g) in rewards.iter().zip(teacher_is_gold) {
        match (r, g) {
            (0, _) => {}
            (1, true) => counts.0 += 1,
            (1, false) => counts.1 += 1,
            _ => return Err(Error::contract(format!("binary reward expected, got {r}"))),
        }
    }
    apply_counts(model, counts, rewards.len(), rule)
}

/// Initial conditions of one target domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainProfile {
    pub initial_skills: Vec<f64>,
    pub stream_length: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DomainProfile {
    /// Five sources, 100k instances in batches of 16.
    fn default() -> Self {
        DomainProfile {
            initial_skills: vec![0.6, 0.5, 0.55, 0.4, 0.3],
            stream_length: 100_000,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl DomainProfile {
    pub fn num_sources(&self) -> usize {
        self.initial_skills.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_skills.is_empty() {
            return Err(Error::config("at least one source model is required"));
        }
        if let Some(s) = self.initial_skills.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::config(format!("initial skill {s} outside [0, 1]")));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.stream_length < self.batch_size {
            return Err(Error::config(format!(
                "stream length {} is shorter than one batch of {}",
                self.stream_length, self.batch_size
            )));
        }
        Ok(())
    }
}
