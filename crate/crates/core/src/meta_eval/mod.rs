//! Meta-evaluation of metrics against human judgments.

mod rating;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rating::{
    ensemble_rank, expected_wins, metric_judgments, trueskill_rank, Rating, RatingState,
    TrueSkillParams,
};

/// Human judgments over a set of systems.
///
/// `rankings[i]` maps the systems ranked for source `i` to their rank
/// (1 = best, ties share a value). Systems absent from a source were not
/// ranked there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentSet {
    pub systems: Vec<String>,
    pub rankings: Vec<BTreeMap<String, u32>>,
    pub system_gold: BTreeMap<String, f64>,
    pub label: Option<String>,
}

impl JudgmentSet {
    pub fn new(
        systems: Vec<String>,
        rankings: Vec<BTreeMap<String, u32>>,
        system_gold: BTreeMap<String, f64>,
        label: Option<String>,
    ) -> Result<Self> {
        let known: BTreeSet<&str> = systems.iter().map(String::as_str).collect();
        if known.len() != systems.len() {
            return Err(Error::Validation("duplicate system names".into()));
        }
        for (i, ranking) in rankings.iter().enumerate() {
            for (name, &rank) in ranking {
                if !known.contains(name.as_str()) {
                    return Err(Error::Validation(format!(
                        "source {i}: unknown system {name:?}"
                    )));
                }
                if rank == 0 {
                    return Err(Error::Validation(format!(
                        "source {i}: rank of {name} must be >= 1"
                    )));
                }
            }
        }
        for (name, v) in &system_gold {
            if !known.contains(name.as_str()) {
                return Err(Error::Validation(format!(
                    "gold score for unknown system {name:?}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "gold score of {name} is not finite"
                )));
            }
        }
        Ok(JudgmentSet {
            systems,
            rankings,
            system_gold,
            label,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.rankings.len()
    }

    /// `(source, better, worse)` system indices for every strictly ordered
    /// pair. Pairs are listed by source, then by system index.
    pub fn decisive_pairs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (src, ranking) in self.rankings.iter().enumerate() {
            for (i, a) in self.systems.iter().enumerate() {
                let Some(ra) = ranking.get(a) else { continue };
                for (j, b) in self.systems.iter().enumerate().skip(i + 1) {
                    let Some(rb) = ranking.get(b) else { continue };
                    match ra.cmp(rb) {
                        std::cmp::Ordering::Less => out.push((src, i, j)),
                        std::cmp::Ordering::Greater => out.push((src, j, i)),
                        std::cmp::Ordering::Equal => {}
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrResult {
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub accuracy: Option<f64>,
    pub kendall: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// The dataset's official system scores.
    #[default]
    Average,
    ExpectedWins,
    #[serde(rename = "trueskill")]
    TrueSkill,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Aggregation::Average),
            "expected_wins" => Ok(Aggregation::ExpectedWins),
            "trueskill" => Ok(Aggregation::TrueSkill),
            _ => Err(Error::usage(format!(
                "unknown aggregation {s:?} (expected average, expected_wins or trueskill)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Metric ties count in the denominator.
    #[default]
    Penalize,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemCorrOptions {
    pub aggregation: Aggregation,
    pub higher_is_better: bool,
    pub trueskill: TrueSkillParams,
}

impl Default for SystemCorrOptions {
    fn default() -> Self {
        SystemCorrOptions {
            aggregation: Aggregation::Average,
            higher_is_better: true,
            trueskill: TrueSkillParams::default(),
        }
    }
}

/// Human system scores under the given aggregation. Systems with no
/// decisive comparison are omitted under Expected Wins.
pub fn human_system_scores(
    judgments: &JudgmentSet,
    aggregation: Aggregation,
    trueskill: &TrueSkillParams,
) -> Result<BTreeMap<String, f64>> {
    Ok(match aggregation {
        Aggregation::Average => judgments.system_gold.clone(),
        Aggregation::ExpectedWins => expected_wins(judgments)?
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect(),
        Aggregation::TrueSkill => trueskill_rank(judgments, trueskill)?
            .ratings
            .into_iter()
            .map(|(k, r)| (k, r.mu))
            .collect(),
    })
}

/// Metric and human scores for systems present on both sides, ordered by
/// human score (descending, then name).
pub(crate) fn paired_by_human(
    metric: &BTreeMap<String, f64>,
    human: &BTreeMap<String, f64>,
    higher_is_better: bool,
) -> Vec<(String, f64, f64)> {
    let mut rows: Vec<(String, f64, f64)> = human
        .iter()
        .filter_map(|(name, &h)| {
            let m = *metric.get(name)?;
            Some((name.clone(), if higher_is_better { m } else { -m }, h))
        })
        .collect();
    for name in human.keys().filter(|n| !metric.contains_key(*n)) {
        log::warn!("system {name} has no metric score and is left out");
    }
    rows.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    rows
}

pub(crate) fn correlate(rows: &[(String, f64, f64)]) -> CorrResult {
    let m: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.2).collect();
    CorrResult {
        pearson: stats::pearson(&m, &h),
        spearman: stats::spearman(&m, &h),
        ..Default::default()
    }
}

pub fn corr_system(
    metric_scores: &BTreeMap<String, f64>,
    judgments: &JudgmentSet,
    opts: &SystemCorrOptions,
) -> Result<CorrResult> {
    let human = human_system_scores(judgments, opts.aggregation, &opts.trueskill)?;
    let rows = paired_by_human(metric_scores, &human, opts.higher_is_better);
    if rows.len() < 3 {
        return Err(Error::Degenerate(format!(
            "system-level correlation needs at least 3 systems, got {}",
            rows.len()
        )));
    }
    Ok(correlate(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PairCounts {
    pub agree: u64,
    pub disagree: u64,
    pub metric_ties: u64,
}

impl PairCounts {
    fn add(self, o: PairCounts) -> PairCounts {
        PairCounts {
            agree: self.agree + o.agree,
            disagree: self.disagree + o.disagree,
            metric_ties: self.metric_ties + o.metric_ties,
        }
    }

    pub fn total(&self) -> u64 {
        self.agree + self.disagree + self.metric_ties
    }
}

/// Checks score lists against the judgments and returns them indexed by
/// system position (`None` for systems without scores).
pub(crate) fn scores_by_index<'a>(
    sentence_scores: &'a BTreeMap<String, Vec<Option<f64>>>,
    judgments: &JudgmentSet,
) -> Result<Vec<Option<&'a [Option<f64>]>>> {
    for (name, list) in sentence_scores {
        if list.len() != judgments.num_sources() {
            return Err(Error::LengthMismatch {
                what: format!("sentence scores of {name}"),
                expected: judgments.num_sources(),
                actual: list.len(),
            });
        }
    }
    Ok(judgments
        .systems
        .iter()
        .map(|s| sentence_scores.get(s).map(Vec::as_slice))
        .collect())
}

/// Metric preference on each human-decisive pair where both systems are scored:
/// `Some(true)` agrees, `Some(false)` disagrees, `None` is a metric tie.
pub(crate) fn pair_outcomes(
    sentence_scores: &BTreeMap<String, Vec<Option<f64>>>,
    judgments: &JudgmentSet,
    higher_is_better: bool,
) -> Result<Vec<((usize, usize, usize), Option<bool>)>> {
    let by_index = scores_by_index(sentence_scores, judgments)?;
    let score = |sys: usize, src: usize| by_index[sys].and_then(|l| l[src]);
    let pairs = judgments.decisive_pairs();
    Ok(pairs
        .par_iter()
        .filter_map(|&(src, better, worse)| {
            let (a, b) = (score(better, src)?, score(worse, src)?);
            let (a, b) = if higher_is_better { (a, b) } else { (b, a) };
            let outcome = if a > b {
                Some(true)
            } else if a < b {
                Some(false)
            } else {
                None
            };
            Some(((src, better, worse), outcome))
        })
        .collect())
}

pub fn sentence_pair_counts(
    sentence_scores: &BTreeMap<String, Vec<Option<f64>>>,
    judgments: &JudgmentSet,
    higher_is_better: bool,
) -> Result<PairCounts> {
    let outcomes = pair_outcomes(sentence_scores, judgments, higher_is_better)?;
    Ok(outcomes
        .par_iter()
        .map(|(_, o)| match o {
            Some(true) => PairCounts {
                agree: 1,
                ..Default::default()
            },
            Some(false) => PairCounts {
                disagree: 1,
                ..Default::default()
            },
            None => PairCounts {
                metric_ties: 1,
                ..Default::default()
            },
        })
        .reduce(PairCounts::default, PairCounts::add))
}

/// Pairwise accuracy and Kendall's tau over all human-decisive pairs.
pub fn corr_sentence(
    sentence_scores: &BTreeMap<String, Vec<Option<f64>>>,
    judgments: &JudgmentSet,
    policy: TiePolicy,
    higher_is_better: bool,
) -> Result<CorrResult> {
    let c = sentence_pair_counts(sentence_scores, judgments, higher_is_better)?;
    let denom = match policy {
        TiePolicy::Penalize => c.total(),
        TiePolicy::Ignore => c.agree + c.disagree,
    };
    if denom == 0 {
        return Err(Error::Degenerate("no comparable sentence pairs".into()));
    }
    let d = denom as f64;
    Ok(CorrResult {
        accuracy: Some(c.agree as f64 / d),
        kendall: Some((c.agree as f64 - c.disagree as f64) / d),
        ..Default::default()
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn judgments(ranks: &[&[u32]]) -> JudgmentSet {
        let n = ranks[0].len();
        let systems: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let rankings = ranks
            .iter()
            .map(|r| {
                systems
                    .iter()
                    .cloned()
                    .zip(r.iter().copied())
                    .filter(|p| p.1 > 0)
                    .collect()
            })
            .collect();
        let gold = systems
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), (n - i) as f64))
            .collect();
        JudgmentSet::new(systems, rankings, gold, None).unwrap()
    }

    fn sent_scores(rows: &[&[f64]]) -> BTreeMap<String, Vec<Option<f64>>> {
        let n = rows[0].len();
        (0..n)
            .map(|s| (format!("s{s}"), rows.iter().map(|r| Some(r[s])).collect()))
            .collect()
    }

    #[test]
    fn system_identity_and_negation() {
        let j = judgments(&[&[1, 2, 3, 4]]);
        let m = j.system_gold.clone();
        let r = corr_system(&m, &j, &SystemCorrOptions::default()).unwrap();
        assert_eq!((r.pearson, r.spearman), (Some(1.0), Some(1.0)));
        let neg: BTreeMap<_, _> = m.iter().map(|(k, v)| (k.clone(), -v)).collect();
        let r = corr_system(&neg, &j, &SystemCorrOptions::default()).unwrap();
        assert_eq!((r.pearson, r.spearman), (Some(-1.0), Some(-1.0)));
        let lower = SystemCorrOptions {
            higher_is_better: false,
            ..Default::default()
        };
        assert_eq!(corr_system(&neg, &j, &lower).unwrap().pearson, Some(1.0));
    }

    #[test]
    fn system_needs_three() {
        let j = judgments(&[&[1, 2]]);
        let err = corr_system(&j.system_gold.clone(), &j, &SystemCorrOptions::default());
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn monotone_transform_keeps_spearman() {
        let j = judgments(&[&[1, 2, 3, 4, 5]]);
        let m: BTreeMap<String, f64> = [
            ("s0", 0.3),
            ("s1", 0.9),
            ("s2", 0.1),
            ("s3", 0.5),
            ("s4", 0.2),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
        let cubed = m
            .iter()
            .map(|(k, v)| (k.clone(), v.powi(3) + 7.0))
            .collect();
        let o = SystemCorrOptions::default();
        assert_eq!(
            corr_system(&m, &j, &o).unwrap().spearman,
            corr_system(&cubed, &j, &o).unwrap().spearman
        );
    }

    #[test]
    fn sentence_counts() {
        // human: s0 < s1 < s2 in one source, 3 decisive pairs
        let j = judgments(&[&[1, 2, 3]]);
        let perfect = sent_scores(&[&[3.0, 2.0, 1.0]]);
        let r = corr_sentence(&perfect, &j, TiePolicy::Penalize, true).unwrap();
        assert_eq!((r.accuracy, r.kendall), (Some(1.0), Some(1.0)));

        let constant = sent_scores(&[&[1.0, 1.0, 1.0]]);
        let r = corr_sentence(&constant, &j, TiePolicy::Penalize, true).unwrap();
        assert_eq!((r.accuracy, r.kendall), (Some(0.0), Some(0.0)));
        assert!(corr_sentence(&constant, &j, TiePolicy::Ignore, true).is_err());

        // s0>s1 agree, s0>s2 agree, s1<s2 disagree
        let mixed = sent_scores(&[&[3.0, 1.0, 2.0]]);
        let r = corr_sentence(&mixed, &j, TiePolicy::Penalize, true).unwrap();
        assert!((r.accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.kendall.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn human_ties_and_missing_are_skipped() {
        let j = judgments(&[&[1, 1, 2], &[1, 0, 2]]);
        assert_eq!(j.decisive_pairs(), vec![(0, 0, 2), (0, 1, 2), (1, 0, 2)]);
        let mut scores = sent_scores(&[&[2.0, 2.0, 1.0], &[2.0, 0.0, 1.0]]);
        scores.get_mut("s2").unwrap()[1] = None;
        let c = sentence_pair_counts(&scores, &j, true).unwrap();
        assert_eq!(
            c,
            PairCounts {
                agree: 2,
                disagree: 0,
                metric_ties: 0
            }
        );
    }

    #[test]
    fn tie_free_accuracy_kendall_relation() {
        let j = judgments(&[&[1, 2, 3, 4], &[2, 1, 4, 3]]);
        let s = sent_scores(&[&[4.0, 1.0, 3.0, 2.0], &[1.0, 2.0, 3.0, 4.0]]);
        let r = corr_sentence(&s, &j, TiePolicy::Penalize, true).unwrap();
        assert!((r.kendall.unwrap() - (2.0 * r.accuracy.unwrap() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_judgments() {
        let sys = vec!["a".to_string(), "b".to_string()];
        let bad = vec![[("c".to_string(), 1)].into()];
        assert!(JudgmentSet::new(sys.clone(), bad, BTreeMap::new(), None).is_err());
        let zero = vec![[("a".to_string(), 0)].into()];
        assert!(JudgmentSet::new(sys, zero, BTreeMap::new(), None).is_err());
    }
}
