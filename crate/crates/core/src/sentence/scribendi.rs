//! Scribendi: perplexity improvement gated by surface similarity.

use rayon::prelude::*;

use super::perplexity::PerplexityProvider;
use crate::error::{check_len, Error, Result};
use crate::types::{MetricResult, TokenSeq};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// `1 − char_edit_distance / max(len)`; 1.0 for two empty strings.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

/// [`levenshtein_ratio`] after sorting each side's tokens.
pub fn token_sort_ratio(a: &TokenSeq, b: &TokenSeq) -> f64 {
    let sorted = |s: &TokenSeq| {
        let mut t: Vec<&str> = s.iter().map(String::as_str).collect();
        t.sort_unstable();
        t.join(" ")
    };
    levenshtein_ratio(&sorted(a), &sorted(b))
}

/// Sentence score in {−1, 0, +1}; the corpus score is their sum.
///
/// Unchanged hypotheses score 0. A hypothesis whose perplexity does not drop
/// scores −1, including equal perplexity. Otherwise it scores +1 only if it
/// stays close to the source (max of the two ratios ≥ `threshold`).
pub fn scribendi(
    sources: &[TokenSeq],
    hyps: &[TokenSeq],
    ppl: &dyn PerplexityProvider,
    threshold: f64,
) -> Result<MetricResult> {
    check_len("hypotheses", sources.len(), hyps.len())?;
    let sentence_scores = sources
        .par_iter()
        .zip(hyps)
        .enumerate()
        .map(|(index, (s, h))| {
            if s == h {
                return Ok(0.0);
            }
            let (s_text, h_text) = (s.join(), h.join());
            let lookup = |text: &str| {
                ppl.perplexity(text)
                    .map_err(|message| Error::Perplexity { index, message })
            };
            if lookup(&h_text)? >= lookup(&s_text)? {
                return Ok(-1.0);
            }
            let similarity = levenshtein_ratio(&s_text, &h_text).max(token_sort_ratio(s, h));
            Ok(if similarity >= threshold { 1.0 } else { -1.0 })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricResult {
        corpus_score: sentence_scores.iter().sum(),
        sentence_scores,
    })
}
