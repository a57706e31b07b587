//! Shared domain types: token sequences, edits, and score containers.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A whitespace-tokenized sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Builds a sequence from tokens. Empty tokens and tokens containing
    /// whitespace are rejected so the join/split round trip holds.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::usage(format!("invalid token {bad:?}")));
        }
        Ok(TokenSeq(tokens))
    }

    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

impl From<&str> for TokenSeq {
    fn from(text: &str) -> Self {
        tokenize(text)
    }
}

/// Splits on runs of unicode whitespace.
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq(text.split_whitespace().map(str::to_owned).collect())
}

/// Replacement of the source span `[src_start, src_end)` by `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edit {
    pub src_start: usize,
    pub src_end: usize,
    pub replacement: Vec<String>,
}

impl Edit {
    pub fn new(src_start: usize, src_end: usize, replacement: Vec<String>) -> Self {
        Edit {
            src_start,
            src_end,
            replacement,
        }
    }

    pub fn is_insertion(&self) -> bool {
        self.src_start == self.src_end
    }

    /// Checks the edit against the source it claims to modify.
    pub fn validate(&self, source: &[String]) -> Result<()> {
        if self.src_start > self.src_end || self.src_end > source.len() {
            return Err(Error::Validation(format!(
                "edit span [{}, {}) out of range for {} tokens",
                self.src_start,
                self.src_end,
                source.len()
            )));
        }
        if self.replacement.as_slice() == &source[self.src_start..self.src_end] {
            return Err(Error::Validation(format!(
                "edit [{}, {}) is a no-op",
                self.src_start, self.src_end
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {})->{}",
            self.src_start,
            self.src_end,
            self.replacement.join(" ")
        )
    }
}

/// Edits of one target sentence relative to `source`, sorted and non-overlapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSet {
    pub source: TokenSeq,
    pub edits: Vec<Edit>,
}

impl EditSet {
    /// Validates span bounds, no-ops and ordering. Zero-width edits at the same
    /// index are merged by concatenating their replacements.
    pub fn new(source: TokenSeq, mut edits: Vec<Edit>) -> Result<Self> {
        edits.sort_by_key(|e| (e.src_start, e.src_end));
        let mut merged: Vec<Edit> = Vec::with_capacity(edits.len());
        for edit in edits {
            match merged.last_mut() {
                Some(prev)
                    if prev.is_insertion()
                        && edit.is_insertion()
                        && prev.src_start == edit.src_start =>
                {
                    prev.replacement.extend(edit.replacement);
                }
                Some(prev) if prev.src_end > edit.src_start => {
                    return Err(Error::Validation(format!(
                        "overlapping edits {prev} and {edit}"
                    )));
                }
                _ => merged.push(edit),
            }
        }
        for e in &merged {
            e.validate(&source)?;
        }
        Ok(EditSet {
            source,
            edits: merged,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    /// Applies all edits left to right.
    pub fn apply(&self) -> TokenSeq {
        let src = self.source.tokens();
        let mut out = Vec::with_capacity(src.len());
        let mut pos = 0;
        for e in &self.edits {
            out.extend_from_slice(&src[pos..e.src_start]);
            out.extend(e.replacement.iter().cloned());
            pos = e.src_end;
        }
        out.extend_from_slice(&src[pos..]);
        TokenSeq(out)
    }

    pub fn contains(&self, edit: &Edit) -> bool {
        self.edits.binary_search(edit).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdit {
    pub edit: Edit,
    pub weight: f64,
}

impl WeightedEdit {
    pub fn new(edit: Edit, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Validation(format!(
                "edit weight must be a finite non-negative number, got {weight}"
            )));
        }
        Ok(WeightedEdit { edit, weight })
    }
}

/// `(1 + β²)·P·R / (β²·P + R)`, or 0 when the denominator vanishes.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::usage(format!("beta must be positive, got {beta}")));
    }
    Ok(f_beta_unchecked(precision, recall, beta))
}

pub(crate) fn f_beta_unchecked(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    f_beta(1.0, 1.0, beta).map(|_| ())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRFScore {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
}

impl PRFScore {
    /// Scores from weighted masses: true-positive mass, hypothesis-side mass
    /// and reference-side mass. An empty side has ratio 1.0, so a hypothesis
    /// and reference that both make no edits score P = R = F = 1.
    pub fn from_masses(tp: f64, hyp_mass: f64, ref_mass: f64, beta: f64) -> Self {
        let precision = if hyp_mass == 0.0 { 1.0 } else { tp / hyp_mass };
        let recall = if ref_mass == 0.0 { 1.0 } else { tp / ref_mass };
        PRFScore {
            precision,
            recall,
            f_beta: f_beta_unchecked(precision, recall, beta),
            beta,
        }
    }
}

/// Corpus score plus one score per evaluated source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub corpus_score: f64,
    pub sentence_scores: Vec<f64>,
}
