//! Weighted edit-level precision, recall and F-beta.
//!
//! Every scheme shares one formula: precision is the weight of matched edits
//! over the weight of hypothesis edits, recall is the same mass over the
//! weight of reference edits. Schemes differ only in where `w_e` comes from:
//! constant weights (ERRANT), an external weight file (PT-ERRANT style), or
//! correction difficulty estimated from a pool of systems (GoToScorer).

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::extract_edits;
use crate::error::{check_len, Error, Result};
use crate::types::{check_beta, f_beta_unchecked, Edit, EditSet, MetricResult, PRFScore, TokenSeq};

/// Source of per-edit weights.
pub trait EditWeightProvider: Sync {
    fn weight(&self, sentence_index: usize, edit: &Edit) -> f64;
}

/// The same weight for every edit.
#[derive(Debug, Clone, Copy)]
pub struct UniformWeights(pub f64);

impl Default for UniformWeights {
    fn default() -> Self {
        UniformWeights(1.0)
    }
}

impl EditWeightProvider for UniformWeights {
    fn weight(&self, _sentence_index: usize, _edit: &Edit) -> f64 {
        self.0
    }
}

type WeightKey = (usize, usize, usize, Vec<String>);

/// Weights looked up by `(sentence, span, replacement)`; anything absent
/// gets `default`.
#[derive(Debug, Clone)]
pub struct TableWeights {
    map: HashMap<WeightKey, f64>,
    pub default: f64,
}

impl TableWeights {
    pub fn new(default: f64) -> Self {
        TableWeights {
            map: HashMap::new(),
            default,
        }
    }

    pub fn insert(&mut self, sentence_index: usize, edit: &Edit, weight: f64) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Validation(format!(
                "weight for sentence {sentence_index} edit {edit} must be non-negative, got {weight}"
            )));
        }
        self.map.insert(
            (
                sentence_index,
                edit.src_start,
                edit.src_end,
                edit.replacement.clone(),
            ),
            weight,
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl EditWeightProvider for TableWeights {
    fn weight(&self, sentence_index: usize, edit: &Edit) -> f64 {
        // TODO: avoid the clone by keying on a borrowed view once raw_entry stabilizes
        self.map
            .get(&(
                sentence_index,
                edit.src_start,
                edit.src_end,
                edit.replacement.clone(),
            ))
            .copied()
            .unwrap_or(self.default)
    }
}

/// Reads a tab-separated weight file:
/// `sentence_index \t src_start \t src_end \t replacement \t weight`.
/// The replacement column holds space-joined tokens (empty for deletions).
pub fn load_edit_weights(path: impl AsRef<Path>) -> Result<TableWeights> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edit_weights(&text, path)
}

pub fn parse_edit_weights(text: &str, path: &Path) -> Result<TableWeights> {
    let mut table = TableWeights::new(1.0);
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let num = |idx: usize, name: &str| -> Result<usize> {
            fields[idx]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad {name} {:?}", fields[idx])))
        };
        let sentence = num(0, "sentence index")?;
        let start = num(1, "src_start")?;
        let end = num(2, "src_end")?;
        if end < start {
            return Err(Error::parse(path, lineno, "src_end precedes src_start"));
        }
        let weight: f64 = fields[4]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad weight {:?}", fields[4])))?;
        let replacement = fields[3].split_whitespace().map(str::to_owned).collect();
        table
            .insert(sentence, &Edit::new(start, end, replacement), weight)
            .map_err(|e| match e {
                Error::Validation(msg) => {
                    Error::Validation(format!("{}:{lineno}: {msg}", path.display()))
                }
                other => other,
            })?;
    }
    Ok(table)
}

/// Weighted masses for one (hypothesis, reference) pair.
///
/// `keep_hit`/`keep_total` carry kept-span mass for the difficulty-weighted
/// scorer and are zero otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EditCounts {
    pub tp: f64,
    pub hyp: f64,
    pub reference: f64,
    pub keep_hit: f64,
    pub keep_total: f64,
}

impl EditCounts {
    pub fn score(&self, beta: f64) -> PRFScore {
        let precision = if self.hyp == 0.0 {
            1.0
        } else {
            self.tp / self.hyp
        };
        let recall_denom = self.reference + self.keep_total;
        let recall = if recall_denom == 0.0 {
            1.0
        } else {
            (self.tp + self.keep_hit) / recall_denom
        };
        PRFScore {
            precision,
            recall,
            f_beta: f_beta_unchecked(precision, recall, beta),
            beta,
        }
    }

    fn add(&mut self, other: &EditCounts) {
        self.tp += other.tp;
        self.hyp += other.hyp;
        self.reference += other.reference;
        self.keep_hit += other.keep_hit;
        self.keep_total += other.keep_total;
    }
}

/// Weighted masses of `hyp` against `reference` for sentence `sentence_index`.
pub fn count_edits(
    hyp: &EditSet,
    reference: &EditSet,
    sentence_index: usize,
    weights: &dyn EditWeightProvider,
) -> EditCounts {
    let mut counts = EditCounts::default();
    for e in &hyp.edits {
        let w = weights.weight(sentence_index, e);
        counts.hyp += w;
        if reference.contains(e) {
            counts.tp += w;
        }
    }
    for e in &reference.edits {
        counts.reference += weights.weight(sentence_index, e);
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEditScore {
    pub best_reference: usize,
    pub counts: EditCounts,
    pub score: PRFScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLevelReport {
    pub corpus: PRFScore,
    pub sentences: Vec<SentenceEditScore>,
}

impl EditLevelReport {
    pub fn to_metric_result(&self) -> MetricResult {
        MetricResult {
            corpus_score: self.corpus.f_beta,
            sentence_scores: self.sentences.iter().map(|s| s.score.f_beta).collect(),
        }
    }
}

/// Picks the reference with the highest sentence F-beta (lowest index on ties).
fn best_reference<I>(candidates: I, beta: f64) -> Option<SentenceEditScore>
where
    I: IntoIterator<Item = EditCounts>,
{
    let mut best: Option<SentenceEditScore> = None;
    for (k, counts) in candidates.into_iter().enumerate() {
        let score = counts.score(beta);
        if best
            .as_ref()
            .map_or(true, |b| score.f_beta > b.score.f_beta)
        {
            best = Some(SentenceEditScore {
                best_reference: k,
                counts,
                score,
            });
        }
    }
    best
}

fn aggregate(sentences: Vec<SentenceEditScore>, beta: f64) -> EditLevelReport {
    let mut total = EditCounts::default();
    for s in &sentences {
        total.add(&s.counts);
    }
    EditLevelReport {
        corpus: total.score(beta),
        sentences,
    }
}

/// Scores pre-extracted edit sets: `items[i] = (hypothesis edits, reference edits...)`.
pub fn score_edit_sets(
    items: &[(EditSet, Vec<EditSet>)],
    beta: f64,
    weights: &dyn EditWeightProvider,
) -> Result<EditLevelReport> {
    check_beta(beta)?;
    let sentences = items
        .par_iter()
        .enumerate()
        .map(|(i, (hyp, refs))| {
            if refs.is_empty() {
                return Err(Error::usage(format!("sentence {i} has no references")));
            }
            for r in refs {
                if r.source != hyp.source {
                    return Err(Error::usage(format!(
                        "sentence {i}: reference edits refer to a different source"
                    )));
                }
            }
            Ok(
                best_reference(refs.iter().map(|r| count_edits(hyp, r, i, weights)), beta)
                    .expect("non-empty references"),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(sentences, beta))
}

pub(crate) fn check_refs(n: usize, refs: &[Vec<TokenSeq>]) -> Result<()> {
    if refs.is_empty() {
        return Err(Error::usage("at least one reference set is required"));
    }
    for (k, r) in refs.iter().enumerate() {
        check_len(&format!("reference set {k}"), n, r.len())?;
    }
    Ok(())
}

/// Weighted edit-level F-beta. `refs[k][i]` is reference `k` of sentence `i`.
pub fn score_edit_level_report(
    sources: &[TokenSeq],
    hyps: &[TokenSeq],
    refs: &[Vec<TokenSeq>],
    beta: f64,
    weights: &dyn EditWeightProvider,
) -> Result<EditLevelReport> {
    check_len("hypotheses", sources.len(), hyps.len())?;
    check_refs(sources.len(), refs)?;
    let items: Vec<(EditSet, Vec<EditSet>)> = (0..sources.len())
        .into_par_iter()
        .map(|i| {
            let src = &sources[i];
            (
                extract_edits(src, &hyps[i]),
                refs.iter().map(|r| extract_edits(src, &r[i])).collect(),
            )
        })
        .collect();
    score_edit_sets(&items, beta, weights)
}

pub fn score_edit_level(
    sources: &[TokenSeq],
    hyps: &[TokenSeq],
    refs: &[Vec<TokenSeq>],
    beta: f64,
    weights: &dyn EditWeightProvider,
) -> Result<MetricResult> {
    Ok(score_edit_level_report(sources, hyps, refs, beta, weights)?.to_metric_result())
}

/// Half-open token span of the source.
pub type Span = (usize, usize);

/// Does an edit touch a unit span of the source? Zero-width edits touch a
/// non-empty span only strictly inside it.
fn touches(edit: &Edit, span: Span) -> bool {
    let (a, b) = (edit.src_start, edit.src_end);
    let (c, d) = span;
    match (a == b, c == d) {
        (false, false) => a < d && c < b,
        (true, false) => c < a && a < d,
        (false, true) => a <= c && c <= b,
        (true, true) => a == c,
    }
}

/// Difficulty weights of one sentence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentenceDifficulty {
    pub reference_edits: Vec<(Edit, f64)>,
    pub kept_spans: Vec<(Span, f64)>,
}

impl SentenceDifficulty {
    fn edit_weight(&self, edit: &Edit) -> Option<f64> {
        self.reference_edits
            .iter()
            .find(|(e, _)| e == edit)
            .map(|(_, w)| *w)
    }

    /// Weight of an edit that matches no reference edit: the hardest unit it
    /// disturbs, falling back to the units adjacent to a boundary insertion.
    fn spurious_weight(&self, edit: &Edit) -> f64 {
        let units = self
            .reference_edits
            .iter()
            .map(|(e, w)| ((e.src_start, e.src_end), *w))
            .chain(self.kept_spans.iter().copied());
        let mut touched = None::<f64>;
        let mut adjacent = None::<f64>;
        for (span, w) in units {
            if touches(edit, span) {
                touched = Some(touched.map_or(w, |t| t.max(w)));
            } else if edit.src_start == span.1 || edit.src_end == span.0 {
                adjacent = Some(adjacent.map_or(w, |t| t.max(w)));
            }
        }
        touched.or(adjacent).unwrap_or(1.0)
    }
}

/// Correction difficulty of every first-reference edit and every kept span.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DifficultyTable {
    pub sentences: Vec<SentenceDifficulty>,
    /// Systems counted, including the identity system.
    pub num_systems: usize,
}

impl EditWeightProvider for DifficultyTable {
    fn weight(&self, sentence_index: usize, edit: &Edit) -> f64 {
        match self.sentences.get(sentence_index) {
            Some(s) => s
                .edit_weight(edit)
                .unwrap_or_else(|| s.spurious_weight(edit)),
            None => 1.0,
        }
    }
}

/// Maximal runs of source tokens untouched by reference edits, split at
/// reference insertion points.
pub fn kept_spans(reference: &EditSet) -> Vec<Span> {
    let n = reference.source.len();
    let mut spans = Vec::new();
    let mut start = 0;
    for e in &reference.edits {
        if e.src_start > start {
            spans.push((start, e.src_start));
        }
        start = start.max(e.src_end);
    }
    if n > start {
        spans.push((start, n));
    }
    spans
}

/// Difficulty = 1 − (systems that got it right) / K, where K counts every
/// system plus the identity system that leaves each source unchanged.
pub fn gotoscorer_difficulty(
    sources: &[TokenSeq],
    refs_first: &[TokenSeq],
    system_outputs: &[Vec<TokenSeq>],
) -> Result<DifficultyTable> {
    if system_outputs.is_empty() {
        return Err(Error::usage(
            "difficulty estimation needs at least one system",
        ));
    }
    check_len("first reference", sources.len(), refs_first.len())?;
    for (k, sys) in system_outputs.iter().enumerate() {
        check_len(&format!("system output {k}"), sources.len(), sys.len())?;
    }
    let k_total = (system_outputs.len() + 1) as f64;
    let sentences = (0..sources.len())
        .into_par_iter()
        .map(|i| {
            let reference = extract_edits(&sources[i], &refs_first[i]);
            let kept = kept_spans(&reference);
            let hyp_sets: Vec<EditSet> = system_outputs
                .iter()
                .map(|sys| extract_edits(&sources[i], &sys[i]))
                .collect();
            let reference_edits = reference
                .edits
                .iter()
                .map(|e| {
                    let hits = hyp_sets.iter().filter(|h| h.contains(e)).count();
                    (e.clone(), 1.0 - hits as f64 / k_total)
                })
                .collect();
            let kept_spans = kept
                .into_iter()
                .map(|span| {
                    // the identity system always keeps every span
                    let keeps = 1 + hyp_sets
                        .iter()
                        .filter(|h| !h.edits.iter().any(|e| touches(e, span)))
                        .count();
                    (span, 1.0 - keeps as f64 / k_total)
                })
                .collect();
            SentenceDifficulty {
                reference_edits,
                kept_spans,
            }
        })
        .collect();
    Ok(DifficultyTable {
        sentences,
        num_systems: system_outputs.len() + 1,
    })
}

/// Difficulty-weighted F-beta against the first reference. Kept spans enter
/// recall: each weighs its difficulty and counts as recovered when the
/// hypothesis leaves it untouched.
pub fn score_gotoscorer(
    sources: &[TokenSeq],
    hyps: &[TokenSeq],
    refs_first: &[TokenSeq],
    beta: f64,
    table: &DifficultyTable,
) -> Result<EditLevelReport> {
    check_beta(beta)?;
    check_len("hypotheses", sources.len(), hyps.len())?;
    check_len("first reference", sources.len(), refs_first.len())?;
    check_len("difficulty table", sources.len(), table.sentences.len())?;
    let sentences = (0..sources.len())
        .into_par_iter()
        .map(|i| {
            let hyp = extract_edits(&sources[i], &hyps[i]);
            let reference = extract_edits(&sources[i], &refs_first[i]);
            let mut counts = count_edits(&hyp, &reference, i, table);
            for &(span, w) in &table.sentences[i].kept_spans {
                counts.keep_total += w;
                if !hyp.edits.iter().any(|e| touches(e, span)) {
                    counts.keep_hit += w;
                }
            }
            SentenceEditScore {
                best_reference: 0,
                counts,
                score: counts.score(beta),
            }
        })
        .collect();
    Ok(aggregate(sentences, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::tokenize;

    fn seqs(lines: &[&str]) -> Vec<TokenSeq> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    #[test]
    fn listing_corpus() {
        let n = 100;
        let sources = vec![tokenize("He go to the school."); n];
        let hyps = vec![tokenize("He goes to the school."); n];
        let refs = vec![vec![tokenize("He goes to school."); n]];
        let result =
            score_edit_level(&sources, &hyps, &refs, 0.5, &UniformWeights::default()).unwrap();
        assert!((result.corpus_score - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(result.sentence_scores.len(), n);
        assert!(result
            .sentence_scores
            .iter()
            .all(|s| (s - 5.0 / 6.0).abs() < 1e-12));
    }

    #[test]
    fn exact_match_scores_one() {
        let sources = seqs(&["a b c", "x y"]);
        let hyps = seqs(&["a c", "x z y"]);
        let refs = vec![hyps.clone()];
        let r = score_edit_level(&sources, &hyps, &refs, 0.5, &UniformWeights::default()).unwrap();
        assert_eq!(r.corpus_score, 1.0);
    }

    #[test]
    fn uniform_scale_cancels() {
        let sources = seqs(&["a b c d", "x y z"]);
        let hyps = seqs(&["a B c e", "x z"]);
        let refs = vec![seqs(&["a B c d", "x y"])];
        let one =
            score_edit_level_report(&sources, &hyps, &refs, 0.5, &UniformWeights(1.0)).unwrap();
        let three =
            score_edit_level_report(&sources, &hyps, &refs, 0.5, &UniformWeights(3.0)).unwrap();
        assert!((one.corpus.f_beta - three.corpus.f_beta).abs() < 1e-12);
        assert!((one.corpus.precision - three.corpus.precision).abs() < 1e-12);
    }

    #[test]
    fn best_reference_is_chosen() {
        let sources = seqs(&["a b c"]);
        let hyps = seqs(&["a x c"]);
        let refs = vec![seqs(&["a y c"]), seqs(&["a x c"])];
        let r = score_edit_level_report(&sources, &hyps, &refs, 0.5, &UniformWeights::default())
            .unwrap();
        assert_eq!(r.sentences[0].best_reference, 1);
        assert_eq!(r.corpus.f_beta, 1.0);
        // ties resolve to the lowest index
        let refs = vec![seqs(&["a y c"]), seqs(&["a z c"])];
        let r = score_edit_level_report(&sources, &hyps, &refs, 0.5, &UniformWeights::default())
            .unwrap();
        assert_eq!(r.sentences[0].best_reference, 0);
    }

    #[test]
    fn usage_errors() {
        let sources = seqs(&["a b"]);
        let w = UniformWeights::default();
        assert!(score_edit_level(&sources, &[], &[sources.clone()], 0.5, &w).is_err());
        assert!(score_edit_level(&sources, &sources, &[], 0.5, &w).is_err());
        assert!(score_edit_level(&sources, &sources, &[vec![]], 0.5, &w).is_err());
        assert!(score_edit_level(&sources, &sources, &[sources.clone()], 0.0, &w).is_err());
    }

    #[test]
    fn weight_file() {
        let table = parse_edit_weights(
            "0\t1\t2\tgoes\t0.7\n\n1\t0\t1\t\t0.25\n",
            Path::new("w.tsv"),
        )
        .unwrap();
        let goes = Edit::new(1, 2, vec!["goes".into()]);
        assert_eq!(table.weight(0, &goes), 0.7);
        assert_eq!(table.weight(1, &Edit::new(0, 1, vec![])), 0.25);
        assert_eq!(table.weight(5, &goes), 1.0);

        assert!(matches!(
            parse_edit_weights("0\t1\t2\tgoes\t-1\n", Path::new("w.tsv")),
            Err(Error::Validation(_))
        ));
        match parse_edit_weights("0\t1\t2\tgoes\t0.5\n0\t1\tgoes\t0.5\n", Path::new("w.tsv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_edit_weights("0\t1\t2\tgoes\tabc\n", Path::new("w.tsv")).is_err());
    }

    #[test]
    fn kept_span_layout() {
        let r = extract_edits(&tokenize("a b c d e"), &tokenize("a x c d y e"));
        assert_eq!(kept_spans(&r), vec![(0, 1), (2, 4), (4, 5)]);
    }

    #[test]
    fn difficulty_counts() {
        let sources = seqs(&["a b c"]);
        let refs = seqs(&["a x c"]);
        let fixed = seqs(&["a x c"]);
        let other = seqs(&["a b d"]);

        // every system (identity excluded) fixes it: only identity misses
        let t = gotoscorer_difficulty(
            &sources,
            &refs,
            &[fixed.clone(), fixed.clone(), fixed.clone()],
        )
        .unwrap();
        assert_eq!(t.num_systems, 4);
        assert!((t.sentences[0].reference_edits[0].1 - 0.25).abs() < 1e-12);

        // exactly one of three systems: 1 - 1/4
        let t = gotoscorer_difficulty(
            &sources,
            &refs,
            &[fixed.clone(), other.clone(), sources.clone()],
        )
        .unwrap();
        assert!((t.sentences[0].reference_edits[0].1 - 0.75).abs() < 1e-12);
        // span (2,3) "c" is kept by identity, fixed and source systems; `other` rewrites it
        let c_span = t.sentences[0]
            .kept_spans
            .iter()
            .find(|(s, _)| *s == (2, 3))
            .unwrap();
        assert!((c_span.1 - 0.25).abs() < 1e-12);

        // nobody fixes it
        let t = gotoscorer_difficulty(&sources, &refs, &[other.clone()]).unwrap();
        assert_eq!(t.sentences[0].reference_edits[0].1, 1.0);

        assert!(gotoscorer_difficulty(&sources, &refs, &[]).is_err());
    }

    #[test]
    fn gotoscorer_scores() {
        let sources = seqs(&["a b c d"]);
        let refs = seqs(&["a x c d"]);
        let good = seqs(&["a x c d"]);
        let bad = seqs(&["a b c e"]);
        let table = gotoscorer_difficulty(&sources, &refs, &[good.clone(), bad.clone()]).unwrap();
        let g = score_gotoscorer(&sources, &good, &refs, 0.5, &table).unwrap();
        assert_eq!(g.corpus.f_beta, 1.0);
        let b = score_gotoscorer(&sources, &bad, &refs, 0.5, &table).unwrap();
        assert!(b.corpus.f_beta < g.corpus.f_beta);
        assert_eq!(b.corpus.precision, 0.0);
    }
}
