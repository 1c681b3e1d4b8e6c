//! Token-level ROUGE-1, ROUGE-2 and ROUGE-L, and the scalar RL reward.
//!
//! No stemming or stopword removal. ROUGE-L is the sentence-level variant:
//! one LCS over the whole summary.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl Prf {
    fn from_counts(overlap: usize, cand: usize, reference: usize) -> Prf {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let (precision, recall) = (ratio(overlap, cand), ratio(overlap, reference));
        let f = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RougeScores {
    pub r1: Prf,
    pub r2: Prf,
    pub rl: Prf,
}

impl RougeScores {
    pub fn compute<T: Ord>(candidate: &[T], reference: &[T]) -> Self {
        RougeScores {
            r1: rouge_n(candidate, reference, 1),
            r2: rouge_n(candidate, reference, 2),
            rl: rouge_l(candidate, reference),
        }
    }

    /// F-scores in `[r1, r2, rl]` order.
    pub fn f_scores(&self) -> [f64; 3] {
        [self.r1.f, self.r2.f, self.rl.f]
    }

    /// Component-wise mean; zero for an empty slice.
    pub fn mean(all: &[RougeScores]) -> RougeScores {
        if all.is_empty() {
            return RougeScores::default();
        }
        let n = all.len() as f64;
        let avg = |pick: fn(&RougeScores) -> Prf| {
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for s in all {
                let x = pick(s);
                p += x.precision;
                r += x.recall;
                f += x.f;
            }
            Prf {
                precision: p / n,
                recall: r / n,
                f: f / n,
            }
        };
        RougeScores {
            r1: avg(|s| s.r1),
            r2: avg(|s| s.r2),
            rl: avg(|s| s.rl),
        }
    }
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. Empty denominators give 0.
pub fn rouge_n<T: Ord>(candidate: &[T], reference: &[T], n: usize) -> Prf {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |m: &BTreeMap<&[T], usize>| m.values().sum::<usize>();
    Prf::from_counts(overlap, total(&cand), total(&refc))
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Prf {
    Prf::from_counts(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

/// Weights over ROUGE F-scores. The weights sum to one, so the reward is in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r1: 0.0,
            r2: 0.0,
            rl: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn new(r1: f64, r2: f64, rl: f64) -> Result<Self> {
        let ok = [r1, r2, rl].iter().all(|w| w.is_finite() && *w >= 0.0);
        if !ok || ((r1 + r2 + rl) - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "reward weights {r1}, {r2}, {rl} must be >= 0 and sum to 1"
            )));
        }
        Ok(RewardConfig { r1, r2, rl })
    }
}

impl FromStr for RewardConfig {
    type Err = Error;

    /// `rouge_l`, `rouge_1`, `rouge_2`, or weights such as `r1:0.5,rl:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rouge_l" => return Ok(RewardConfig::default()),
            "rouge_1" => return RewardConfig::new(1.0, 0.0, 0.0),
            "rouge_2" => return RewardConfig::new(0.0, 1.0, 0.0),
            _ => {}
        }
        let (mut r1, mut r2, mut rl) = (0.0, 0.0, 0.0);
        for part in s.split(',') {
            let bad = || Error::Invalid(format!("bad reward setting `{s}`"));
            let (k, v) = part.split_once(':').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "r1" => r1 = v,
                "r2" => r2 = v,
                "rl" => rl = v,
                _ => return Err(bad()),
            }
        }
        RewardConfig::new(r1, r2, rl)
    }
}

impl core::fmt::Display for RewardConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match (self.r1, self.r2, self.rl) {
            (0.0, 0.0, 1.0) => f.write_str("rouge_l"),
            (1.0, 0.0, 0.0) => f.write_str("rouge_1"),
            (0.0, 1.0, 0.0) => f.write_str("rouge_2"),
            (a, b, c) => {
                let s: String = format!("r1:{a},r2:{b},rl:{c}");
                f.write_str(&s)
            }
        }
    }
}

/// Scalar reward for a decoded candidate (STOP already stripped).
pub fn reward<T: Ord>(candidate: &[T], reference: &[T], config: &RewardConfig) -> f64 {
    let mut r = 0.0;
    if config.r1 > 0.0 {
        r += config.r1 * rouge_n(candidate, reference, 1).f;
    }
    if config.r2 > 0.0 {
        r += config.r2 * rouge_n(candidate, reference, 2).f;
    }
    if config.rl > 0.0 {
        r += config.rl * rouge_l(candidate, reference).f;
    }
    r
}
