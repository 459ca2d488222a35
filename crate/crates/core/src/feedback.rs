//! Simulated user feedback.
//!
//! Spans are closed intervals of token indices, so a single-token answer is
//! `(i, i)`. Binary feedback is index-wise exact match; preference feedback
//! compares index-wise F1 scores and may be corrupted by a [`NoiseChannel`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed `[start, end]` token-index span over a passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    start: usize,
    end: usize,
}

/// A span emitted by a model.
pub type SpanPrediction = Span;
/// The annotated answer span of an instance.
pub type GoldSpan = Span;

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::contract(format!("span start {start} > end {end}")));
        }
        Ok(Span { start, end })
    }

    /// Builds a span from two endpoints in either order.
    pub fn ordered(a: usize, b: usize) -> Self {
        Span {
            start: a.min(b),
            end: a.max(b),
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// Number of tokens covered.
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn overlap(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }
}

/// 1 iff both endpoints match the annotation.
pub fn exact_match_reward(pred: &SpanPrediction, gold: &GoldSpan) -> u8 {
    u8::from(pred == gold)
}

/// F1 between the index sets covered by `pred` and `gold`.
///
/// Computed as `2·|overlap| / (|pred| + |gold|)`, which equals `2PR/(P+R)`
/// and rounds every rational F1 value to the same float, so equal scores
/// compare equal exactly.
pub fn span_f1(pred: &SpanPrediction, gold: &GoldSpan) -> f64 {
    let overlap = pred.overlap(gold);
    if overlap == 0 {
        return 0.0;
    }
    (2 * overlap) as f64 / (pred.len() + gold.len()) as f64
}

/// A user's verdict on a (left, right) pair of answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreferenceLabel {
    /// `>`
    LeftBetter,
    /// `<`
    RightBetter,
    /// `=`
    NoPreference,
}

impl PreferenceLabel {
    pub const ALL: [PreferenceLabel; 3] = [
        PreferenceLabel::LeftBetter,
        PreferenceLabel::RightBetter,
        PreferenceLabel::NoPreference,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            PreferenceLabel::LeftBetter => ">",
            PreferenceLabel::RightBetter => "<",
            PreferenceLabel::NoPreference => "=",
        }
    }

    /// Row/column of this label in a [`NoiseChannel`] matrix.
    pub fn index(self) -> usize {
        match self {
            PreferenceLabel::LeftBetter => 0,
            PreferenceLabel::RightBetter => 1,
            PreferenceLabel::NoPreference => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

/// Higher score wins; exactly equal scores give no preference.
pub fn make_preference(score_left: f64, score_right: f64) -> PreferenceLabel {
    if score_left > score_right {
        PreferenceLabel::LeftBetter
    } else if score_right > score_left {
        PreferenceLabel::RightBetter
    } else {
        PreferenceLabel::NoPreference
    }
}

/// Maps a label to the one-hot `(r_left, r_right)` reward pair.
pub fn preference_to_rewards(label: PreferenceLabel) -> (u8, u8) {
    match label {
        PreferenceLabel::LeftBetter => (1, 0),
        PreferenceLabel::RightBetter => (0, 1),
        PreferenceLabel::NoPreference => (0, 0),
    }
}

/// Per-instance label corruption.
///
/// With probability `noise_rate` a label is corrupted and replaced by a draw
/// from its row of `transition`. The matrix has a zero diagonal, so a
/// corrupted label always changes. The default transition splits the mass
/// equally between the two other labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    noise_rate: f64,
    transition: [[f64; 3]; 3],
}

pub const EQUAL_SPLIT_TRANSITION: [[f64; 3]; 3] =
    [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];

impl NoiseChannel {
    pub fn new(noise_rate: f64, transition: [[f64; 3]; 3]) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_rate) {
            return Err(Error::config(format!("noise rate {noise_rate} outside [0, 1]")));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::config(format!("transition row {i} has an entry outside [0, 1]")));
            }
            if row[i] != 0.0 {
                return Err(Error::config(format!("transition row {i} must have a zero diagonal")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!("transition row {i} sums to {sum}, expected 1")));
            }
        }
        Ok(NoiseChannel {
            noise_rate,
            transition,
        })
    }

    /// Channel with the equal-split transition.
    pub fn equal_split(noise_rate: f64) -> Result<Self> {
        Self::new(noise_rate, EQUAL_SPLIT_TRANSITION)
    }

    pub fn noiseless() -> Self {
        NoiseChannel {
            noise_rate: 0.0,
            transition: EQUAL_SPLIT_TRANSITION,
        }
    }

    pub fn noise_rate(&self) -> f64 {
        self.noise_rate
    }

    pub fn transition(&self) -> &[[f64; 3]; 3] {
        &self.transition
    }

    /// End-to-end label distribution: `(1 - p)·I + p·T`.
    pub fn effective_matrix(&self) -> [[f64; 3]; 3] {
        let p = self.noise_rate;
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = p * self.transition[i][j] + if i == j { 1.0 - p } else { 0.0 };
            }
        }
        m
    }
}

impl Default for NoiseChannel {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Passes `label` through the channel.
///
/// Always consumes one uniform draw for the corruption decision and a second
/// one only when the label is corrupted.
pub fn apply_noise<R: Rng + ?Sized>(
    label: PreferenceLabel,
    channel: &NoiseChannel,
    rng: &mut R,
) -> PreferenceLabel {
    let corrupt: f64 = rng.gen();
    if corrupt >= channel.noise_rate {
        return label;
    }
    let row = &channel.transition[label.index()];
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut fallback = label;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        fallback = PreferenceLabel::ALL[j];
        acc += p;
        if u < acc {
            return fallback;
        }
    }
    // rounding left `acc` a hair under 1
    fallback
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn span(a: usize, b: usize) -> Span {
        Span::new(a, b).unwrap()
    }

    #[test]
    fn span_rejects_reversed_bounds() {
        assert!(matches!(Span::new(5, 4), Err(Error::Contract(_))));
        assert_eq!(Span::ordered(7, 3), span(3, 7));
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match_reward(&span(4, 6), &span(4, 6)), 1);
        assert_eq!(exact_match_reward(&span(4, 7), &span(4, 6)), 0);
        assert_eq!(exact_match_reward(&span(0, 0), &span(0, 0)), 1);
    }

    #[test]
    fn span_f1_examples() {
        assert_eq!(span_f1(&span(4, 6), &span(4, 6)), 1.0);
        // overlap {4,5}, P = R = 2/3
        assert_eq!(span_f1(&span(3, 5), &span(4, 6)), 2.0 / 3.0);
        assert_eq!(span_f1(&span(0, 1), &span(5, 9)), 0.0);
    }

    #[test]
    fn preference_examples() {
        assert_eq!(make_preference(0.9, 0.3), PreferenceLabel::LeftBetter);
        assert_eq!(make_preference(0.5, 0.5), PreferenceLabel::NoPreference);
        assert_eq!(make_preference(0.2, 0.7), PreferenceLabel::RightBetter);
        assert_eq!(preference_to_rewards(PreferenceLabel::LeftBetter), (1, 0));
        assert_eq!(preference_to_rewards(PreferenceLabel::NoPreference), (0, 0));
        assert_eq!(preference_to_rewards(PreferenceLabel::RightBetter), (0, 1));
        assert_eq!(PreferenceLabel::RightBetter.symbol(), "<");
    }

    #[test]
    fn channel_validation() {
        assert!(NoiseChannel::equal_split(1.5).is_err());
        let mut t = EQUAL_SPLIT_TRANSITION;
        t[0] = [0.2, 0.4, 0.4];
        assert!(NoiseChannel::new(0.1, t).is_err());
        t[0] = [0.0, 0.7, 0.4];
        assert!(NoiseChannel::new(0.1, t).is_err());
        assert!(NoiseChannel::new(0.1, [[0.0, 1.0, 0.0], [0.25, 0.0, 0.75], [0.5, 0.5, 0.0]]).is_ok());
    }

    #[test]
    fn zero_rate_is_identity() {
        let ch = NoiseChannel::noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            for label in PreferenceLabel::ALL {
                assert_eq!(apply_noise(label, &ch, &mut rng), label);
            }
        }
    }

    #[test]
    fn full_rate_splits_evenly() {
        let ch = NoiseChannel::equal_split(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[apply_noise(PreferenceLabel::LeftBetter, &ch, &mut rng).index()] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            assert!((*c as f64 / draws as f64 - 0.5).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn partial_rate_keeps_label() {
        let ch = NoiseChannel::equal_split(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let kept = (0..draws)
            .filter(|_| apply_noise(PreferenceLabel::NoPreference, &ch, &mut rng) == PreferenceLabel::NoPreference)
            .count();
        assert!((kept as f64 / draws as f64 - 0.7).abs() < 0.02);
    }

    #[test]
    fn skewed_transition_is_respected() {
        let ch = NoiseChannel::new(1.0, [[0.0, 1.0, 0.0], [0.25, 0.0, 0.75], [0.5, 0.5, 0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert_eq!(apply_noise(PreferenceLabel::LeftBetter, &ch, &mut rng), PreferenceLabel::RightBetter);
        }
        let n = 100_000;
        let to_none = (0..n)
            .filter(|_| apply_noise(PreferenceLabel::RightBetter, &ch, &mut rng) == PreferenceLabel::NoPreference)
            .count();
        assert!((to_none as f64 / n as f64 - 0.75).abs() < 0.02);
    }

    #[test]
    fn effective_matrix_rows() {
        let m = NoiseChannel::equal_split(0.3).unwrap().effective_matrix();
        assert!((m[0][0] - 0.7).abs() < 1e-15);
        assert!((m[0][1] - 0.15).abs() < 1e-15);
        for row in m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
