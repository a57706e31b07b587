//! n-gram Venn decomposition of (source, hypothesis, reference) and the two
//! metrics built on it, GLEU and GREEN.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edit_metrics::check_refs;
use crate::error::{check_len, Error, Result};
use crate::types::{check_beta, f_beta_unchecked, MetricResult, TokenSeq};

/// Counts of the seven Venn regions for one gram order.
///
/// | group | meaning                              |
/// |-------|--------------------------------------|
/// | TK    | in source, hypothesis and reference  |
/// | TD    | only in source                       |
/// | TI    | in hypothesis and reference, not source |
/// | OD    | in source and reference, not hypothesis |
/// | OI    | only in hypothesis                   |
/// | UD    | in source and hypothesis, not reference |
/// | UI    | only in reference                    |
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramVenn {
    pub n: usize,
    pub tk: u64,
    pub td: u64,
    pub ti: u64,
    pub od: u64,
    pub oi: u64,
    pub ud: u64,
    pub ui: u64,
}

impl NGramVenn {
    /// GLEU numerator, clamped at zero.
    pub fn gleu_numerator(&self) -> u64 {
        (self.ti + self.tk).saturating_sub(self.ud)
    }

    pub fn gleu_denominator(&self) -> u64 {
        self.ti + self.tk + self.oi + self.ud
    }

    pub fn green_hits(&self) -> u64 {
        self.ti + self.td + self.tk
    }

    /// GREEN precision; 1.0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.green_hits(), self.green_hits() + self.oi + self.od)
    }

    /// GREEN recall; 1.0 when nothing was expected.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.green_hits(), self.green_hits() + self.ui + self.ud)
    }

    fn add(&mut self, other: &NGramVenn) {
        self.tk += other.tk;
        self.td += other.td;
        self.ti += other.ti;
        self.od += other.od;
        self.oi += other.oi;
        self.ud += other.ud;
        self.ui += other.ui;
    }
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn grams(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut out = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Venn counts of order-`n` grams under multiset (clipped) semantics:
/// intersection is `min`, difference is saturating subtraction.
pub fn venn_counts(
    source: &TokenSeq,
    hyp: &TokenSeq,
    reference: &TokenSeq,
    n: usize,
) -> Result<NGramVenn> {
    if n == 0 {
        return Err(Error::usage("gram order must be at least 1"));
    }
    Ok(venn_counts_unchecked(source, hyp, reference, n))
}

fn venn_counts_unchecked(
    source: &TokenSeq,
    hyp: &TokenSeq,
    reference: &TokenSeq,
    n: usize,
) -> NGramVenn {
    let s = grams(source, n);
    let h = grams(hyp, n);
    let r = grams(reference, n);
    let mut venn = NGramVenn {
        n,
        ..Default::default()
    };
    let count = |m: &HashMap<&[String], u64>, g: &[String]| m.get(g).copied().unwrap_or(0);
    let mut keys: Vec<&[String]> = s.keys().chain(h.keys()).chain(r.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    for g in keys {
        let (cs, ch, cr) = (count(&s, g), count(&h, g), count(&r, g));
        venn.tk += cs.min(ch).min(cr);
        venn.ti += ch.min(cr).saturating_sub(cs);
        venn.od += cs.min(cr).saturating_sub(ch);
        venn.ud += cs.min(ch).saturating_sub(cr);
        venn.td += cs.saturating_sub(ch).saturating_sub(cr);
        venn.oi += ch.saturating_sub(cs).saturating_sub(cr);
        venn.ui += cr.saturating_sub(cs).saturating_sub(ch);
    }
    venn
}

/// Venn counts for orders `1..=n_max`.
pub fn venn_profile(
    source: &TokenSeq,
    hyp: &TokenSeq,
    reference: &TokenSeq,
    n_max: usize,
) -> Vec<NGramVenn> {
    (1..=n_max)
        .map(|n| venn_counts_unchecked(source, hyp, reference, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GleuConfig {
    pub n_max: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for GleuConfig {
    fn default() -> Self {
        GleuConfig {
            n_max: 4,
            iterations: 500,
            seed: 0,
        }
    }
}

/// Per-order counts of one (sentence, reference) pair plus lengths for the
/// brevity penalty.
#[derive(Debug, Clone)]
struct GleuStats {
    numer: Vec<u64>,
    denom: Vec<u64>,
    hyp_len: usize,
    ref_len: usize,
}

impl GleuStats {
    fn new(source: &TokenSeq, hyp: &TokenSeq, reference: &TokenSeq, n_max: usize) -> Self {
        let venn = venn_profile(source, hyp, reference, n_max);
        GleuStats {
            numer: venn.iter().map(NGramVenn::gleu_numerator).collect(),
            denom: venn.iter().map(NGramVenn::gleu_denominator).collect(),
            hyp_len: hyp.len(),
            ref_len: reference.len(),
        }
    }
}

/// `BP · exp(mean log p_n)` over orders with a non-zero denominator.
fn gleu_from_totals(numer: &[u64], denom: &[u64], hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut used = 0usize;
    for (&num, &den) in numer.iter().zip(denom) {
        if den == 0 {
            continue;
        }
        if num == 0 {
            return 0.0;
        }
        log_sum += (num as f64 / den as f64).ln();
        used += 1;
    }
    if used == 0 {
        return 0.0;
    }
    let bp = (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0);
    bp * (log_sum / used as f64).exp()
}

fn sentence_gleu(stats: &GleuStats) -> f64 {
    // orders longer than the hypothesis contribute nothing
    let cap = stats.hyp_len.min(stats.numer.len());
    gleu_from_totals(
        &stats.numer[..cap],
        &stats.denom[..cap],
        stats.hyp_len,
        stats.ref_len,
    )
}

/// Corpus GLEU with reference sampling plus per-sentence GLEU averaged over
/// all references. `refs[k][i]` is reference `k` of sentence `i`.
pub fn gleu(
    sources: &[TokenSeq],
    hyps: &[TokenSeq],
    refs: &[Vec<TokenSeq>],
    config: &GleuConfig,
) -> Result<MetricResult> {
    check_len("hypotheses", sources.len(), hyps.len())?;
    check_refs(sources.len(), refs)?;
    if config.iterations == 0 {
        return Err(Error::usage("GLEU needs at least one iteration"));
    }
    if config.n_max == 0 {
        return Err(Error::usage("n_max must be at least 1"));
    }
    let n_max = config.n_max;
    // stats[i][k]: sentence i against reference k
    let stats: Vec<Vec<GleuStats>> = (0..sources.len())
        .into_par_iter()
        .map(|i| {
            refs.iter()
                .map(|r| GleuStats::new(&sources[i], &hyps[i], &r[i], n_max))
                .collect()
        })
        .collect();

    let sentence_scores = stats
        .iter()
        .map(|per_ref| per_ref.iter().map(sentence_gleu).sum::<f64>() / per_ref.len() as f64)
        .collect();

    // a single reference makes every iteration identical
    let iterations = if refs.len() == 1 {
        1
    } else {
        config.iterations
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut total = 0.0;
    let mut numer = vec![0u64; n_max];
    let mut denom = vec![0u64; n_max];
    for _ in 0..iterations {
        numer.iter_mut().for_each(|x| *x = 0);
        denom.iter_mut().for_each(|x| *x = 0);
        let (mut hyp_len, mut ref_len) = (0usize, 0usize);
        for per_ref in &stats {
            let st = &per_ref[rng.gen_range(0..per_ref.len())];
            for n in 0..n_max {
                numer[n] += st.numer[n];
                denom[n] += st.denom[n];
            }
            hyp_len += st.hyp_len;
            ref_len += st.ref_len;
        }
        total += gleu_from_totals(&numer, &denom, hyp_len, ref_len);
    }
    Ok(MetricResult {
        corpus_score: total / iterations as f64,
        sentence_scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MultiRefMode {
    /// Per sentence, the reference with the highest sentence score.
    #[default]
    Best,
    /// Counts summed over every reference.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    pub n_max: usize,
    pub beta: f64,
    pub multi_ref: MultiRefMode,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            n_max: 4,
            beta: 2.0,
            multi_ref: MultiRefMode::Best,
        }
    }
}

/// Geometric means of per-order precision and recall, then F-beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenScore {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for v in values {
        if v == 0.0 {
            return 0.0;
        }
        log_sum += v.ln();
        count += 1;
    }
    if count == 0 {
        1.0
    } else {
        (log_sum / count as f64).exp()
    }
}

pub fn green_score(profile: &[NGramVenn], beta: f64) -> GreenScore {
    let precision = geometric_mean(profile.iter().map(NGramVenn::precision));
    let recall = geometric_mean(profile.iter().map(NGramVenn::recall));
    GreenScore {
        precision,
        recall,
        f_beta: f_beta_unchecked(precision, recall, beta),
    }
}

/// Corpus and sentence GREEN.
pub fn green(
    sources: &[TokenSeq],
    hyps: &[TokenSeq],
    refs: &[Vec<TokenSeq>],
    config: &GreenConfig,
) -> Result<MetricResult> {
    check_len("hypotheses", sources.len(), hyps.len())?;
    check_refs(sources.len(), refs)?;
    check_beta(config.beta)?;
    if config.n_max == 0 {
        return Err(Error::usage("n_max must be at least 1"));
    }
    let n_max = config.n_max;
    let beta = config.beta;
    let chosen: Vec<Vec<NGramVenn>> = (0..sources.len())
        .into_par_iter()
        .map(|i| {
            let profiles = refs
                .iter()
                .map(|r| venn_profile(&sources[i], &hyps[i], &r[i], n_max));
            match config.multi_ref {
                MultiRefMode::Best => {
                    let mut best: Option<(f64, Vec<NGramVenn>)> = None;
                    for p in profiles {
                        let f = green_score(&p, beta).f_beta;
                        if best.as_ref().map_or(true, |(bf, _)| f > *bf) {
                            best = Some((f, p));
                        }
                    }
                    best.expect("non-empty references").1
                }
                MultiRefMode::Sum => profiles
                    .reduce(|mut acc, p| {
                        acc.iter_mut().zip(&p).for_each(|(a, b)| a.add(b));
                        acc
                    })
                    .expect("non-empty references"),
            }
        })
        .collect();

    let sentence_scores = chosen.iter().map(|p| green_score(p, beta).f_beta).collect();
    let mut totals: Vec<NGramVenn> = (1..=n_max)
        .map(|n| NGramVenn {
            n,
            ..Default::default()
        })
        .collect();
    for p in &chosen {
        totals.iter_mut().zip(p).for_each(|(a, b)| a.add(b));
    }
    Ok(MetricResult {
        corpus_score: green_score(&totals, beta).f_beta,
        sentence_scores,
    })
}
