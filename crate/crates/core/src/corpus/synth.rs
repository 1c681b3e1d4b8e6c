//! Synthetic corpora with controllable vocabulary.
//!
//! Articles are 3 to 6 pseudo-sentences of 5 to 12 tokens, each sentence
//! closed by [`SENTENCE_END`]. Ordinary words are lower-case and drawn from a
//! Zipf-weighted frequent pool; a small fraction of tokens are capitalized
//! names from a separate, much larger pool, so a vocabulary sized to the
//! frequent pool leaves them out-of-vocabulary.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Example, Role};
use crate::{rng, Error, Result};

pub const SENTENCE_END: &str = ".";

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ne", "pu", "ra", "si", "to", "vu", "ze", "ba", "de", "fi", "go", "hu", "ja",
    "ko", "le", "mo", "ni",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Summary is the first sentence of the article.
    CopyFirst,
    /// Summary lists the tokens that occur at least twice, in first-occurrence order.
    Keywords,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "copyfirst" | "copy-first" => Ok(Task::CopyFirst),
            "keywords" => Ok(Task::Keywords),
            _ => Err(Error::UnknownTask(s.into())),
        }
    }
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::CopyFirst => "copyfirst",
            Task::Keywords => "keywords",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabProfile {
    /// Size of the lower-case frequent word pool.
    pub frequent: usize,
    /// Size of the capitalized name pool.
    pub rare: usize,
    /// First name index; disjoint offsets give disjoint name pools.
    pub rare_offset: usize,
    /// Per-token probability of drawing a name.
    pub rare_rate: f64,
}

impl Default for VocabProfile {
    fn default() -> Self {
        VocabProfile {
            frequent: 40,
            rare: 400,
            rare_offset: 0,
            rare_rate: 0.05,
        }
    }
}

/// Bijective base-20 spelling of `n + 1`, so every index maps to a distinct word.
fn spell(mut n: usize) -> String {
    n += 1;
    let mut parts = Vec::new();
    while n > 0 {
        n -= 1;
        parts.push(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    parts.reverse();
    parts.concat()
}

pub(crate) fn frequent_word(i: usize) -> String {
    spell(i)
}

pub(crate) fn name_word(i: usize) -> String {
    let w = spell(i);
    let mut chars = w.chars();
    let first = chars.next().unwrap().to_ascii_uppercase();
    format!("{first}{}x", chars.as_str())
}

struct Sampler {
    cumulative: Vec<f64>,
    profile: VocabProfile,
}

impl Sampler {
    fn new(profile: VocabProfile) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..profile.frequent)
            .map(|r| {
                acc += 1.0 / (r as f64 + 1.0);
                acc
            })
            .collect();
        Sampler {
            cumulative,
            profile,
        }
    }

    fn word(&self, rng: &mut ChaCha8Rng) -> String {
        if self.profile.rare > 0 && rng.random::<f64>() < self.profile.rare_rate {
            let j = rng.random_range(0..self.profile.rare);
            return name_word(self.profile.rare_offset + j);
        }
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let rank = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        frequent_word(rank)
    }

    fn article(&self, rng: &mut ChaCha8Rng) -> (Vec<String>, usize) {
        let sentences = rng.random_range(3..=6);
        let mut tokens = Vec::new();
        let mut first_len = 0;
        for s in 0..sentences {
            let len = rng.random_range(5..=12);
            for _ in 0..len - 1 {
                tokens.push(self.word(rng));
            }
            tokens.push(String::from(SENTENCE_END));
            if s == 0 {
                first_len = tokens.len();
            }
        }
        (tokens, first_len)
    }
}

pub(crate) fn keywords(article: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (i, tok) in article.iter().enumerate() {
        if out.contains(tok) || article[..i].contains(tok) {
            continue;
        }
        if article[i + 1..].contains(tok) {
            out.push(tok.clone());
        }
    }
    out
}

/// Deterministic in `(task, n, seed, profile)`. Ids are `line-<n>` so the
/// dataset survives a serialize/parse round trip unchanged.
pub fn gen_synthetic(task: Task, n: usize, seed: u64, profile: &VocabProfile) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Invalid("n must be at least 1".into()));
    }
    if profile.frequent == 0 || !(0.0..=1.0).contains(&profile.rare_rate) {
        return Err(Error::Invalid(format!(
            "bad vocabulary profile {profile:?}"
        )));
    }
    let sampler = Sampler::new(*profile);
    let mut rng = rng::stream(seed, &[0x5e17, task as u64]);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let (article, first_len) = sampler.article(&mut rng);
        let summary = match task {
            Task::CopyFirst => article[..first_len].to_vec(),
            Task::Keywords => keywords(&article),
        };
        examples.push(Example::new(format!("line-{}", i + 1), article, summary)?);
    }
    Dataset::new(task.name(), Role::Source, examples)
}
