//! Test-set scoring and the cross-dataset aggregates.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::corpus::{Dataset, Example};
use crate::decode::{beam_search, ModelPolicy};
use crate::model::PointerGenerator;
use crate::rouge::RougeScores;
use crate::vocab::{decode_ids, encode_source, Vocab};
use crate::{Error, Result};

pub fn avg_score(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `Σ w_i s_i / Σ w_i` with strictly positive weights.
pub fn weighted_avg_score(scores: &[f64], weights: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    if scores.len() != weights.len() {
        return Err(Error::Invalid(format!(
            "{} scores, {} weights",
            scores.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::Invalid(format!("weight {w} is not positive")));
    }
    let num: f64 = scores.iter().zip(weights).map(|(s, w)| s * w).sum();
    Ok(num / weights.iter().sum::<f64>())
}

/// Beam-decodes one article and returns the summary words, OOV copies
/// rendered as the source words.
pub fn summarize(
    model: &PointerGenerator,
    vocab: &Vocab,
    article: &[String],
    beam: usize,
    max_dec: usize,
) -> Result<Vec<String>> {
    let src = encode_source(article, vocab);
    let policy = ModelPolicy::new(model, &src)?;
    let out = beam_search(&policy, beam, max_dec)?;
    decode_ids(out.tokens(), vocab, &src.mapping)
}

pub fn score_example(
    model: &PointerGenerator,
    vocab: &Vocab,
    ex: &Example,
    beam: usize,
    max_enc: usize,
    max_dec: usize,
) -> Result<RougeScores> {
    let article = &ex.article[..ex.article.len().min(max_enc)];
    let words = summarize(model, vocab, article, beam, max_dec)?;
    Ok(RougeScores::compute(&words, &ex.summary))
}

/// Macro-averaged scores over a dataset.
pub fn evaluate_dataset(
    model: &PointerGenerator,
    vocab: &Vocab,
    ds: &Dataset,
    beam: usize,
    max_enc: usize,
    max_dec: usize,
) -> Result<RougeScores> {
    if ds.is_empty() {
        return Err(Error::Empty("test dataset"));
    }
    let all = ds
        .examples()
        .iter()
        .map(|ex| score_example(model, vocab, ex, beam, max_enc, max_dec))
        .collect::<Result<Vec<_>>>()?;
    Ok(RougeScores::mean(&all))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetScores {
    pub name: String,
    pub weight: f64,
    pub scores: RougeScores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub datasets: Vec<DatasetScores>,
    /// Unweighted mean of the per-dataset F-scores (R1, R2, RL).
    pub avg: [f64; 3],
    pub weighted: [f64; 3],
}

impl EvalReport {
    pub fn new(datasets: Vec<DatasetScores>) -> Result<Self> {
        let weights: Vec<f64> = datasets.iter().map(|d| d.weight).collect();
        let mut avg = [0.0; 3];
        let mut weighted = [0.0; 3];
        for k in 0..3 {
            let col: Vec<f64> = datasets.iter().map(|d| d.scores.f_scores()[k]).collect();
            avg[k] = avg_score(&col)?;
            weighted[k] = weighted_avg_score(&col, &weights)?;
        }
        Ok(EvalReport {
            datasets,
            avg,
            weighted,
        })
    }

    /// F-scores ×100 with two decimals.
    pub fn render(&self) -> String {
        let width = self
            .datasets
            .iter()
            .map(|d| d.name.len())
            .chain([12])
            .max()
            .unwrap_or(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:>8} {:>8} {:>8}",
            "dataset", "R1", "R2", "RL"
        );
        let mut row = |name: &str, f: [f64; 3]| {
            let _ = writeln!(
                out,
                "{:<width$} {:>8.2} {:>8.2} {:>8.2}",
                name,
                100.0 * f[0],
                100.0 * f[1],
                100.0 * f[2]
            );
        };
        for d in &self.datasets {
            row(&d.name, d.scores.f_scores());
        }
        row("avg", self.avg);
        row("weighted avg", self.weighted);
        out
    }
}
