//! Examples, datasets and the corpus file format.
//!
//! A corpus file is UTF-8 text with one example per LF-terminated line:
//! `article<TAB>summary`, tokens separated by single spaces. Datasets arrive
//! pre-tokenized; no normalization is applied.

mod synth;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::{rng, Error, Result};

pub use synth::{gen_synthetic, Task, VocabProfile, SENTENCE_END};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    Target,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub article: Vec<String>,
    pub summary: Vec<String>,
}

impl Example {
    pub fn new(id: impl Into<String>, article: Vec<String>, summary: Vec<String>) -> Result<Self> {
        let id = id.into();
        if article.is_empty() {
            return Err(Error::Invalid(format!("example {id}: empty article")));
        }
        if summary.is_empty() {
            return Err(Error::Invalid(format!("example {id}: empty summary")));
        }
        if let Some(bad) = article
            .iter()
            .chain(summary.iter())
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::Invalid(format!("example {id}: bad token {bad:?}")));
        }
        Ok(Example {
            id,
            article,
            summary,
        })
    }

    fn line(&self) -> String {
        let mut s = self.article.join(" ");
        s.push('\t');
        s.push_str(&self.summary.join(" "));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub role: Role,
    examples: Vec<Example>,
}

impl Dataset {
    /// Fails if two examples share an id.
    pub fn new(name: impl Into<String>, role: Role, examples: Vec<Example>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate example id `{}`", ex.id)));
            }
        }
        Ok(Dataset {
            name: name.into(),
            role,
            examples,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Applies [`truncate_example`] to every example.
    pub fn truncated(&self, max_enc: usize, max_dec: usize) -> Dataset {
        Dataset {
            name: self.name.clone(),
            role: self.role,
            examples: self
                .examples
                .iter()
                .map(|e| truncate_example(e, max_enc, max_dec))
                .collect(),
        }
    }
}

/// Parses a corpus. Example ids are `line-<n>`, 1-based.
pub fn parse_corpus(text: &str, name: &str, role: Role) -> Result<Dataset> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut examples = Vec::new();
    if !text.is_empty() {
        for (i, line) in body.split('\n').enumerate() {
            let n = i + 1;
            let err = |msg: &str| Error::Parse {
                line: n,
                msg: msg.to_string(),
            };
            let mut parts = line.split('\t');
            let (article, summary) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(s), None) => (a, s),
                _ => return Err(err("expected exactly one TAB")),
            };
            let article: Vec<String> = article.split_whitespace().map(String::from).collect();
            let summary: Vec<String> = summary.split_whitespace().map(String::from).collect();
            if article.is_empty() {
                return Err(err("empty article"));
            }
            if summary.is_empty() {
                return Err(err("empty summary"));
            }
            examples.push(Example {
                id: format!("line-{n}"),
                article,
                summary,
            });
        }
    }
    Dataset::new(name, role, examples)
}

pub fn serialize_corpus(dataset: &Dataset) -> String {
    let mut out = String::new();
    for ex in &dataset.examples {
        out.push_str(&ex.line());
        out.push('\n');
    }
    out
}

pub fn truncate_example(ex: &Example, max_enc: usize, max_dec: usize) -> Example {
    Example {
        id: ex.id.clone(),
        article: ex.article.iter().take(max_enc.max(1)).cloned().collect(),
        summary: ex.summary.iter().take(max_dec.max(1)).cloned().collect(),
    }
}

/// Concatenates two datasets of the same role. Ids become `<dataset>/<id>`.
pub fn merge_datasets(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    if a.role != b.role {
        return Err(Error::RoleMismatch(a.role, b.role));
    }
    let prefixed = |d: &Dataset| {
        d.examples
            .iter()
            .map(|e| Example {
                id: format!("{}/{}", d.name, e.id),
                ..e.clone()
            })
            .collect::<Vec<_>>()
    };
    let mut examples = prefixed(a);
    examples.extend(prefixed(b));
    Dataset::new(format!("{}+{}", a.name, b.name), a.role, examples)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch<'a> {
    pub examples: Vec<&'a Example>,
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Index form of [`batch_iter`]: a permutation of `0..len` seeded by
/// `(seed, epoch)`, chunked into `batch_size` pieces.
pub fn batch_indices(
    len: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Invalid("batch_size must be at least 1".into()));
    }
    if len == 0 {
        return Err(Error::Empty("dataset"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::stream(seed, &[0xba7c, epoch]));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// One epoch of mini-batches: a permutation seeded by `(seed, epoch)`,
/// chunked into `batch_size` pieces. The final short batch is kept.
pub fn batch_iter(
    dataset: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<impl Iterator<Item = Batch<'_>>> {
    let examples = &dataset.examples;
    let batches: Vec<Batch<'_>> = batch_indices(dataset.len(), batch_size, seed, epoch)?
        .into_iter()
        .map(|chunk| Batch {
            examples: chunk.iter().map(|&i| &examples[i]).collect(),
        })
        .collect();
    Ok(batches.into_iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn ds(n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| Example::new(format!("e{i}"), toks("a b c"), toks("x")).unwrap())
            .collect();
        Dataset::new("d", Role::Source, examples).unwrap()
    }

    #[test]
    fn parse_single_line() {
        let d = parse_corpus("a b c\tx y\n", "t", Role::Source).unwrap();
        assert_eq!(d.len(), 1);
        let ex = &d.examples()[0];
        assert_eq!(ex.article, toks("a b c"));
        assert_eq!(ex.summary, toks("x y"));
        assert_eq!(ex.id, "line-1");
    }

    #[test]
    fn parse_empty_file() {
        let d = parse_corpus("", "t", Role::Test).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn parse_rejects_two_tabs() {
        let err = parse_corpus("a b\tc\td", "t", Role::Source).unwrap_err();
        assert_eq!(err.to_string(), "line 1: expected exactly one TAB");
        let err = parse_corpus("a\tb\nno tab here\n", "t", Role::Source).unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected exactly one TAB");
    }

    #[test]
    fn parse_rejects_empty_side() {
        let err = parse_corpus("a b\t \n", "t", Role::Source).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 1,
                msg: "empty summary".into()
            }
        );
        let err = parse_corpus("\tx\n", "t", Role::Source).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 1,
                msg: "empty article".into()
            }
        );
    }

    #[test]
    fn truncation() {
        let long: Vec<String> = (0..500).map(|i| format!("w{i}")).collect();
        let summ: Vec<String> = (0..150).map(|i| format!("s{i}")).collect();
        let ex = Example::new("e", long.clone(), summ.clone()).unwrap();
        let t = truncate_example(&ex, 400, 100);
        assert_eq!(t.article, long[..400].to_vec());
        assert_eq!(t.summary, summ[..100].to_vec());
        let short = Example::new("e", toks("a b c d e f g h i j"), toks("x")).unwrap();
        assert_eq!(truncate_example(&short, 400, 100), short);
        assert_eq!(truncate_example(&t, 400, 100), t);
    }

    #[test]
    fn merge() {
        let a = Dataset::new("a", Role::Source, ds(3).examples.clone()).unwrap();
        let b = Dataset::new("b", Role::Source, ds(2).examples.clone()).unwrap();
        let m = merge_datasets(&a, &b).unwrap();
        assert_eq!(m.len(), 5);
        // e0 and e1 exist in both inputs
        assert_eq!(m.examples()[0].id, "a/e0");
        assert_eq!(m.examples()[3].id, "b/e0");

        let empty = Dataset::new("z", Role::Source, vec![]).unwrap();
        let m = merge_datasets(&a, &empty).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.examples()[2].article, a.examples()[2].article);

        let t = b.clone().with_role(Role::Target);
        assert_eq!(
            merge_datasets(&a, &t),
            Err(Error::RoleMismatch(Role::Source, Role::Target))
        );
    }

    #[test]
    fn batching() {
        let d = ds(5);
        let sizes: Vec<usize> = batch_iter(&d, 2, 3, 1).unwrap().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);

        let ids = |seed, epoch| -> Vec<String> {
            batch_iter(&d, 1, seed, epoch)
                .unwrap()
                .map(|b| b.examples[0].id.clone())
                .collect()
        };
        assert_eq!(ids(3, 1), ids(3, 1));
        assert_eq!(ids(3, 1).len(), 5);
        let mut sorted = ids(3, 1);
        sorted.sort();
        assert_eq!(sorted, ["e0", "e1", "e2", "e3", "e4"]);

        let empty = Dataset::new("z", Role::Source, vec![]).unwrap();
        assert!(batch_iter(&empty, 2, 0, 0).is_err());
        assert!(batch_iter(&d, 0, 0, 0).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = Example::new("x", toks("a"), toks("b")).unwrap();
        assert!(Dataset::new("d", Role::Source, vec![e.clone(), e]).is_err());
    }
}
