#![allow(dead_code)]

use std::collections::BTreeSet;

use tta_bandit_core::Span;

/// Exact rational `num/den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        let g = gcd(num, den).max(1);
        Ratio { num: num / g, den: den / g }
    }

    fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }

    fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    fn div(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den, self.den * o.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Token-set F1 built from explicit index sets: `2PR / (P + R)`, or 0 with no overlap.
pub fn f1_oracle(pred: (usize, usize), gold: (usize, usize)) -> Ratio {
    let p: BTreeSet<usize> = (pred.0..=pred.1).collect();
    let g: BTreeSet<usize> = (gold.0..=gold.1).collect();
    let overlap = p.intersection(&g).count() as u64;
    if overlap == 0 {
        return Ratio::new(0, 1);
    }
    let precision = Ratio::new(overlap, p.len() as u64);
    let recall = Ratio::new(overlap, g.len() as u64);
    Ratio::new(2, 1).mul(precision).mul(recall).div(precision.add(recall))
}

pub fn all_spans(len: usize) -> Vec<Span> {
    let mut out = Vec::with_capacity(len * (len + 1) / 2);
    for s in 0..len {
        for e in s..len {
            out.push(Span::new(s, e).unwrap());
        }
    }
    out
}

/// Compares `span_f1` to the oracle on every span pair of every passage
/// length up to `max_len`. Returns (pairs checked, first mismatch).
pub fn exhaustive_f1_check(max_len: usize) -> (u64, Option<String>) {
    let spans = all_spans(max_len);
    let mut checked = 0;
    // a span pair fits a passage of length L iff both ends are < L, so the
    // spans of the longest passage cover all shorter ones
    for p in &spans {
        for g in &spans {
            let got = tta_bandit_core::feedback::span_f1(p, g);
            let want = f1_oracle((p.start(), p.end()), (g.start(), g.end())).to_f64();
            checked += 1;
            if got != want {
                return (checked, Some(format!("{p:?} vs {g:?}: {got} != {want}")));
            }
        }
    }
    (checked, None)
}
