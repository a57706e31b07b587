//! Scores a set of systems with the metric chosen in an [`EvalConfig`].

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::{EvalConfig, MetricId};
use crate::edit_metrics::{
    gotoscorer_difficulty, load_edit_weights, score_edit_level, score_gotoscorer, UniformWeights,
};
use crate::error::{Error, Result};
use crate::ngram::{gleu, green, GreenConfig};
use crate::sentence::llm::OpenAiChat;
use crate::sentence::{
    llm_judge, load_external_scores, scribendi, HttpPerplexity, PerplexityProvider, PerplexityTable,
};
use crate::types::{MetricResult, TokenSeq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    /// Absent only for LLM judging when no hypothesis of the system was judged.
    pub corpus_score: Option<f64>,
    pub sentence_scores: Vec<Option<f64>>,
}

impl SystemScore {
    fn from_result(system: &str, r: MetricResult) -> Self {
        SystemScore {
            system: system.to_string(),
            corpus_score: Some(r.corpus_score),
            sentence_scores: r.sentence_scores.into_iter().map(Some).collect(),
        }
    }
}

/// Scores every `(name, hypotheses)` pair. `references` is only invoked by
/// metrics that need references.
pub fn score_systems(
    cfg: &EvalConfig,
    sources: &[TokenSeq],
    systems: &[(String, Vec<TokenSeq>)],
    references: impl FnOnce() -> Result<Vec<Vec<TokenSeq>>>,
) -> Result<Vec<SystemScore>> {
    if systems.is_empty() {
        return Err(Error::usage("no systems to score"));
    }
    for (name, hyps) in systems {
        if hyps.len() != sources.len() {
            return Err(Error::LengthMismatch {
                what: format!("hypotheses of {name}"),
                expected: sources.len(),
                actual: hyps.len(),
            });
        }
    }
    let refs = if cfg.metric.needs_references() {
        let refs = references().map_err(|e| {
            Error::Dataset(format!("metric {} requires references: {e}", cfg.metric))
        })?;
        if refs.is_empty() {
            return Err(Error::Dataset(format!(
                "metric {} requires references",
                cfg.metric
            )));
        }
        refs
    } else {
        Vec::new()
    };

    let each = |f: &dyn Fn(&str, &[TokenSeq]) -> Result<MetricResult>| -> Result<Vec<SystemScore>> {
        systems
            .iter()
            .map(|(name, hyps)| Ok(SystemScore::from_result(name, f(name, hyps)?)))
            .collect()
    };

    match cfg.metric {
        MetricId::Errant => {
            let w = UniformWeights::default();
            each(&|_, h| score_edit_level(sources, h, &refs, cfg.beta, &w))
        }
        MetricId::PtErrant => {
            let path = cfg
                .edit_weights
                .as_ref()
                .ok_or_else(|| Error::Config("pt-errant needs `edit_weights`".into()))?;
            let w = load_edit_weights(path)?;
            each(&|_, h| score_edit_level(sources, h, &refs, cfg.beta, &w))
        }
        MetricId::GoToScorer => {
            let outputs: Vec<Vec<TokenSeq>> = systems.iter().map(|(_, h)| h.clone()).collect();
            let table = gotoscorer_difficulty(sources, &refs[0], &outputs)?;
            each(&|_, h| {
                Ok(score_gotoscorer(sources, h, &refs[0], cfg.beta, &table)?.to_metric_result())
            })
        }
        MetricId::Gleu => {
            let g = cfg.gleu_config();
            each(&|_, h| gleu(sources, h, &refs, &g))
        }
        MetricId::Green => {
            let g: &GreenConfig = &cfg.green;
            each(&|_, h| green(sources, h, &refs, g))
        }
        MetricId::Scribendi => {
            let provider = perplexity_provider(cfg)?;
            each(&|_, h| scribendi(sources, h, provider.as_ref(), cfg.scribendi.threshold))
        }
        MetricId::External => {
            let path = cfg
                .external_scores
                .as_ref()
                .ok_or_else(|| Error::Config("external needs `external_scores`".into()))?;
            let table = load_external_scores(path)?;
            each(&|name, _| table.system_result(name, sources.len()))
        }
        MetricId::LlmS | MetricId::LlmE => {
            let backend = OpenAiChat::from_config(&cfg.llm)?;
            let map: BTreeMap<String, Vec<TokenSeq>> = systems.iter().cloned().collect();
            if map.len() != systems.len() {
                return Err(Error::usage("system names must be unique"));
            }
            let mut judged = llm_judge(sources, &map, &cfg.llm, &backend)?;
            Ok(systems
                .iter()
                .map(|(name, _)| {
                    let j = judged.remove(name).expect("judged every system");
                    SystemScore {
                        system: name.clone(),
                        corpus_score: j.corpus_score,
                        sentence_scores: j.sentence_scores,
                    }
                })
                .collect())
        }
    }
}

fn perplexity_provider(cfg: &EvalConfig) -> Result<Box<dyn PerplexityProvider>> {
    let s = &cfg.scribendi;
    match (&s.ppl_file, &s.ppl_url) {
        (Some(path), _) => Ok(Box::new(PerplexityTable::load(path)?)),
        (None, Some(url)) => Ok(Box::new(HttpPerplexity::new(
            url.clone(),
            Duration::from_secs(s.timeout_secs),
        ))),
        (None, None) => Err(Error::Config(
            "scribendi needs `scribendi.ppl_file` or `scribendi.ppl_url`".into(),
        )),
    }
}

/// Corpus scores by system; systems without a corpus score are left out.
pub fn corpus_scores(scores: &[SystemScore]) -> BTreeMap<String, f64> {
    scores
        .iter()
        .filter_map(|s| s.corpus_score.map(|c| (s.system.clone(), c)))
        .collect()
}

pub fn sentence_scores(scores: &[SystemScore]) -> BTreeMap<String, Vec<Option<f64>>> {
    scores
        .iter()
        .map(|s| (s.system.clone(), s.sentence_scores.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::tokenize;

    fn toks(lines: &[&str]) -> Vec<TokenSeq> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    #[test]
    fn references_are_requested_only_when_needed() {
        let src = toks(&["a b"]);
        let systems = vec![("x".to_string(), toks(&["a c"]))];
        let cfg = EvalConfig::default();
        let err =
            score_systems(&cfg, &src, &systems, || Err(Error::Dataset("none".into()))).unwrap_err();
        assert!(matches!(err, Error::Dataset(_)));

        let cfg = EvalConfig {
            metric: MetricId::External,
            ..Default::default()
        };
        let err = score_systems(&cfg, &src, &systems, || panic!("not needed")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn external_uses_system_names() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("s.tsv");
        std::fs::write(&path, "x\t0\t0.25\nx\t1\t0.75\ny\t0\t1\ny\t1\t0\n").unwrap();
        let cfg = EvalConfig {
            metric: MetricId::External,
            external_scores: Some(path),
            ..Default::default()
        };
        let src = toks(&["a", "b"]);
        let systems = vec![
            ("y".to_string(), src.clone()),
            ("x".to_string(), src.clone()),
        ];
        let out = score_systems(&cfg, &src, &systems, || unreachable!()).unwrap();
        assert_eq!(out[0].system, "y");
        assert_eq!(out[0].corpus_score, Some(0.5));
        assert_eq!(out[1].sentence_scores, vec![Some(0.25), Some(0.75)]);
    }

    #[test]
    fn misaligned_hypotheses() {
        let src = toks(&["a", "b"]);
        let systems = vec![("x".to_string(), toks(&["a"]))];
        let err = score_systems(&EvalConfig::default(), &src, &systems, || {
            Ok(vec![src.clone()])
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
