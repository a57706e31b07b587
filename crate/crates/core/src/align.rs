//! Token-level alignment and edit extraction.
//!
//! The aligner is a weighted Damerau-Levenshtein over tokens, generalized to
//! transpositions of whole blocks. Costs are tracked in half units so every
//! comparison is exact:
//!
//! | operation                                   | cost |
//! |---------------------------------------------|------|
//! | match (identical tokens)                    | 0    |
//! | insert / delete                             | 1    |
//! | substitute, case-only difference            | 1    |
//! | substitute, shared prefix of ≥ 2 chars      | 1.5  |
//! | substitute, otherwise                       | 2    |
//! | transpose a block of `k ≥ 2` tokens         | k    |
//!
//! A block transposition applies when both blocks hold the same lowercased
//! tokens in a different order. Ties in the backtrace resolve as
//! match, transpose, substitute, delete, insert.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Edit, EditSet, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Match,
    Substitute,
    Delete,
    Insert,
    Transpose,
}

/// One step of an alignment; spans are half-open token ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentOp {
    pub kind: OpKind,
    pub src_span: (usize, usize),
    pub tgt_span: (usize, usize),
}

/// Cost in half units (so 2 == one full edit).
pub type HalfCost = u32;

pub(crate) const INDEL: HalfCost = 2;

/// Half-unit substitution cost between two distinct tokens.
pub fn substitution_cost(a: &str, b: &str) -> HalfCost {
    if a == b {
        return 0;
    }
    let (la, lb) = (a.to_lowercase(), b.to_lowercase());
    lowered_substitution_cost(&la, &lb)
}

fn lowered_substitution_cost(la: &str, lb: &str) -> HalfCost {
    if la == lb {
        return 2;
    }
    let (short, long) = if la.chars().count() <= lb.chars().count() {
        (la, lb)
    } else {
        (lb, la)
    };
    if short.chars().count() >= 2 && long.starts_with(short) {
        3
    } else {
        4
    }
}

/// Half-unit cost of one alignment operation over `source`/`target`.
pub fn op_cost(op: &AlignmentOp, source: &[String], target: &[String]) -> HalfCost {
    match op.kind {
        OpKind::Match => 0,
        OpKind::Delete | OpKind::Insert => INDEL,
        OpKind::Substitute => substitution_cost(&source[op.src_span.0], &target[op.tgt_span.0]),
        OpKind::Transpose => INDEL * (op.src_span.1 - op.src_span.0) as HalfCost,
    }
}

/// Total half-unit cost of an alignment.
pub fn alignment_cost(ops: &[AlignmentOp], source: &[String], target: &[String]) -> HalfCost {
    ops.iter().map(|op| op_cost(op, source, target)).sum()
}

#[derive(Clone, Copy)]
enum Back {
    Start,
    Match,
    Transpose(usize),
    Substitute,
    Delete,
    Insert,
}

/// Minimum-cost alignment of `source` onto `target`.
pub fn align(source: &TokenSeq, target: &TokenSeq) -> Vec<AlignmentOp> {
    let src = source.tokens();
    let tgt = target.tokens();
    let (n, m) = (src.len(), tgt.len());
    let src_low: Vec<String> = src.iter().map(|t| t.to_lowercase()).collect();
    let tgt_low: Vec<String> = tgt.iter().map(|t| t.to_lowercase()).collect();

    let width = m + 1;
    let mut cost = vec![HalfCost::MAX; (n + 1) * width];
    let mut back = vec![Back::Start; (n + 1) * width];
    cost[0] = 0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = HalfCost::MAX;
            let mut choice = Back::Start;
            let mut consider = |c: HalfCost, b: Back| {
                if c < best {
                    best = c;
                    choice = b;
                }
            };
            if i > 0 && j > 0 && src[i - 1] == tgt[j - 1] {
                consider(cost[(i - 1) * width + j - 1], Back::Match);
            }
            if i > 1 && j > 1 {
                // Grow the block backwards, tracking the lowercased multiset difference.
                let mut diff: HashMap<&str, i32> = HashMap::new();
                let mut unbalanced = 0usize;
                for k in 1..=i.min(j) {
                    for (tok, delta) in
                        [(src_low[i - k].as_str(), 1), (tgt_low[j - k].as_str(), -1)]
                    {
                        let entry = diff.entry(tok).or_insert(0);
                        let before = *entry;
                        *entry += delta;
                        match (before == 0, *entry == 0) {
                            (true, false) => unbalanced += 1,
                            (false, true) => unbalanced -= 1,
                            _ => {}
                        }
                    }
                    if k >= 2 && unbalanced == 0 && src_low[i - k..i] != tgt_low[j - k..j] {
                        consider(
                            cost[(i - k) * width + j - k].saturating_add(INDEL * k as HalfCost),
                            Back::Transpose(k),
                        );
                    }
                }
            }
            if i > 0 && j > 0 && src[i - 1] != tgt[j - 1] {
                let sub = lowered_substitution_cost(&src_low[i - 1], &tgt_low[j - 1]);
                consider(
                    cost[(i - 1) * width + j - 1].saturating_add(sub),
                    Back::Substitute,
                );
            }
            if i > 0 {
                consider(
                    cost[(i - 1) * width + j].saturating_add(INDEL),
                    Back::Delete,
                );
            }
            if j > 0 {
                consider(cost[i * width + j - 1].saturating_add(INDEL), Back::Insert);
            }
            cost[i * width + j] = best;
            back[i * width + j] = choice;
        }
    }

    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let (kind, di, dj) = match back[i * width + j] {
            Back::Match => (OpKind::Match, 1, 1),
            Back::Transpose(k) => (OpKind::Transpose, k, k),
            Back::Substitute => (OpKind::Substitute, 1, 1),
            Back::Delete => (OpKind::Delete, 1, 0),
            Back::Insert => (OpKind::Insert, 0, 1),
            Back::Start => unreachable!("unreachable alignment cell ({i}, {j})"),
        };
        ops.push(AlignmentOp {
            kind,
            src_span: (i - di, i),
            tgt_span: (j - dj, j),
        });
        i -= di;
        j -= dj;
    }
    ops.reverse();
    ops
}

/// Extracts span edits turning `source` into `target`: maximal runs of
/// non-match alignment operations become one edit each.
pub fn extract_edits(source: &TokenSeq, target: &TokenSeq) -> EditSet {
    let ops = align(source, target);
    let src = source.tokens();
    let tgt = target.tokens();
    let mut edits = Vec::new();
    let mut run: Option<((usize, usize), (usize, usize))> = None;

    let mut flush = |run: &mut Option<((usize, usize), (usize, usize))>| {
        if let Some(((s0, s1), (t0, t1))) = run.take() {
            if src[s0..s1] != tgt[t0..t1] {
                edits.push(Edit::new(s0, s1, tgt[t0..t1].to_vec()));
            }
        }
    };

    for op in &ops {
        if op.kind == OpKind::Match {
            flush(&mut run);
            continue;
        }
        run = Some(match run {
            None => (op.src_span, op.tgt_span),
            Some(((s0, _), (t0, _))) => ((s0, op.src_span.1), (t0, op.tgt_span.1)),
        });
    }
    flush(&mut run);

    EditSet::new(source.clone(), edits).expect("merged alignment runs form a valid edit set")
}

/// Exact equality of span and replacement.
pub fn edit_equal(a: &Edit, b: &Edit) -> bool {
    a == b
}

/// Edits present in both sets. Both sets must share the same source.
pub fn intersect<'a>(a: &'a EditSet, b: &EditSet) -> Result<Vec<&'a Edit>> {
    if a.source != b.source {
        return Err(Error::usage(
            "cannot compare edits extracted from different sources",
        ));
    }
    Ok(a.edits.iter().filter(|e| b.contains(e)).collect())
}
