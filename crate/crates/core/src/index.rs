//! Shared pieces of the UCB index computations.

/// `sqrt(2 ln(horizon) / count)`, with `+inf` for an untried option and the
/// log term clamped at zero while `horizon <= 1`.
pub(crate) fn exploration_bonus(horizon: u64, count: u64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    if horizon <= 1 {
        return 0.0;
    }
    (2.0 * (horizon as f64).ln() / count as f64).sqrt()
}

/// Position of the largest value; ties go to the earliest position.
pub(crate) fn argmax_first<I>(values: I) -> Option<usize>
where
    I: IntoIterator<Item = f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (pos, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((pos, v)),
        }
    }
    best.map(|(pos, _)| pos)
}
