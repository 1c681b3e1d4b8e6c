//! Fixed top-K vocabulary and the per-article extended vocabulary.
//!
//! Ids 0..3 are reserved for the special tokens. Content words follow in
//! rank order. An article's out-of-vocabulary words get ids starting at
//! `vocab.size()`, in first-occurrence order, so the copy mechanism can
//! point at them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::Dataset;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const START: usize = 2;
pub const STOP: usize = 3;
pub const NUM_SPECIALS: usize = 4;
pub const SPECIALS: [&str; NUM_SPECIALS] = ["<pad>", "<unk>", "<s>", "</s>"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from `(word, count)` pairs already in rank order.
    pub fn from_ranked(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (word, count) in entries {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::Invalid(format!("bad vocabulary word {word:?}")));
            }
            if SPECIALS.contains(&word.as_str()) {
                return Err(Error::Invalid(format!("`{word}` is a reserved token")));
            }
            if index
                .insert(word.clone(), NUM_SPECIALS + words.len())
                .is_some()
            {
                return Err(Error::Invalid(format!(
                    "duplicate vocabulary word `{word}`"
                )));
            }
            words.push(word);
            counts.push(count);
        }
        Ok(Vocab {
            words,
            counts,
            index,
        })
    }

    /// Number of ids, specials included.
    pub fn size(&self) -> usize {
        NUM_SPECIALS + self.words.len()
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        if let Some(i) = SPECIALS.iter().position(|s| *s == word) {
            return Some(i);
        }
        self.index.get(word).copied()
    }

    pub fn word_of(&self, id: usize) -> Option<&str> {
        if id < NUM_SPECIALS {
            Some(SPECIALS[id])
        } else {
            self.words.get(id - NUM_SPECIALS).map(String::as_str)
        }
    }

    /// Content words in rank order (specials excluded).
    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
    }

    /// FNV-1a over the content words in id order. Counts do not affect it.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for w in &self.words {
            for &b in w.as_bytes().iter().chain(b"\n") {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    /// `word<TAB>count` lines in rank order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (w, c) in self.words() {
            out.push_str(w);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| err("expected word<TAB>count"))?;
            let count = count
                .parse::<u64>()
                .map_err(|_| err("count is not an integer"))?;
            entries.push((word.to_string(), count));
        }
        Vocab::from_ranked(entries)
    }
}

/// The `k` most frequent article and summary words, ties broken
/// lexicographically.
pub fn build_vocab(dataset: &Dataset, k: usize) -> Result<Vocab> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for ex in dataset.examples() {
        for tok in ex.article.iter().chain(ex.summary.iter()) {
            if !SPECIALS.contains(&tok.as_str()) {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(k);
    Vocab::from_ranked(
        ranked
            .into_iter()
            .map(|(w, c)| (w.to_string(), c))
            .collect(),
    )
}

/// Article OOV words in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedMapping {
    base: usize,
    oov_words: Vec<String>,
}

impl ExtendedMapping {
    pub fn empty(vocab: &Vocab) -> Self {
        ExtendedMapping {
            base: vocab.size(),
            oov_words: Vec::new(),
        }
    }

    pub fn oov_words(&self) -> &[String] {
        &self.oov_words
    }

    pub fn extended_size(&self) -> usize {
        self.base + self.oov_words.len()
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.oov_words
            .iter()
            .position(|w| w == word)
            .map(|i| self.base + i)
    }

    pub fn word_of(&self, id: usize) -> Option<&str> {
        id.checked_sub(self.base)
            .and_then(|i| self.oov_words.get(i))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSource {
    /// Vocabulary ids, OOV positions mapped to UNK (used for embedding).
    pub ids: Vec<usize>,
    /// Extended ids (used for copying).
    pub extended_ids: Vec<usize>,
    pub mapping: ExtendedMapping,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn extended_size(&self) -> usize {
        self.mapping.extended_size()
    }
}

pub fn encode_source<S: AsRef<str>>(tokens: &[S], vocab: &Vocab) -> EncodedSource {
    let mut mapping = ExtendedMapping::empty(vocab);
    let mut ids = Vec::with_capacity(tokens.len());
    let mut extended_ids = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let tok = tok.as_ref();
        match vocab.id_of(tok) {
            Some(id) => {
                ids.push(id);
                extended_ids.push(id);
            }
            None => {
                let ext = match mapping.id_of(tok) {
                    Some(ext) => ext,
                    None => {
                        mapping.oov_words.push(tok.to_string());
                        mapping.extended_size() - 1
                    }
                };
                ids.push(UNK);
                extended_ids.push(ext);
            }
        }
    }
    EncodedSource {
        ids,
        extended_ids,
        mapping,
    }
}

pub fn encode_target<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocab,
    mapping: &ExtendedMapping,
) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            vocab.id_of(t).or_else(|| mapping.id_of(t)).unwrap_or(UNK)
        })
        .collect()
}

/// Reference ids for reward computation: like [`encode_target`], except words
/// that would become UNK get fresh ids at or above the extended size, so they
/// never match anything a decoder can emit.
pub fn encode_reference<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocab,
    mapping: &ExtendedMapping,
) -> Vec<usize> {
    let mut unmatched: BTreeMap<&str, usize> = BTreeMap::new();
    let base = mapping.extended_size();
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            vocab
                .id_of(t)
                .filter(|&id| id != UNK)
                .or_else(|| mapping.id_of(t))
                .unwrap_or_else(|| {
                    let next = base + unmatched.len();
                    *unmatched.entry(t).or_insert(next)
                })
        })
        .collect()
}

pub fn decode_ids(ids: &[usize], vocab: &Vocab, mapping: &ExtendedMapping) -> Result<Vec<String>> {
    ids.iter()
        .map(|&id| {
            vocab
                .word_of(id)
                .or_else(|| mapping.word_of(id))
                .map(String::from)
                .ok_or(Error::IdOutOfRange {
                    id,
                    size: mapping.extended_size(),
                })
        })
        .collect()
}

/// Number of content words the two vocabularies share.
pub fn vocab_overlap(a: &Vocab, b: &Vocab) -> usize {
    let left: BTreeSet<&str> = a.words().map(|(w, _)| w).collect();
    b.words().filter(|(w, _)| left.contains(w)).count()
}
