//! LLM-as-judge scoring over an OpenAI-compatible chat-completion endpoint.
//!
//! For every source the distinct hypotheses of all systems are grouped, the
//! five produced by the most systems are kept (ties broken by hypothesis
//! text), and the model scores each on a 1–5 scale in one request. A score
//! is copied to every system that produced that hypothesis; systems whose
//! hypothesis was not selected get no score for that source.

use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::align::extract_edits;
use crate::error::{check_len, Error, Result};
use crate::types::TokenSeq;

/// Upper bound on hypotheses per request.
pub const MAX_TARGETS: usize = 5;
pub const MIN_SCORE: i64 = 1;
pub const MAX_SCORE: i64 = 5;

const INSTRUCTION: &str = "The goal of this task is to rank the presented targets based on the quality of the sentences.\n\n\
After reading the source sentence and target sentences, please assign a score from a minimum of 1 point to a maximum of 5 points to each target based on the quality of the sentence (note that you can assign the same score multiple times).";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeMode {
    /// Targets are corrected sentences.
    #[default]
    Sentence,
    /// Targets are rendered as edit sequences against the source.
    Edit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmJudgeConfig {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
    pub mode: JudgeMode,
    pub max_batch: usize,
    pub timeout_secs: u64,
    /// Extra attempts after a failed or invalid response.
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for LlmJudgeConfig {
    fn default() -> Self {
        LlmJudgeConfig {
            endpoint: "https://api.openai.com/v1".to_string(),
            model: "gpt-4o-mini-2024-07-18".to_string(),
            api_key_env: Some("OPENAI_API_KEY".to_string()),
            mode: JudgeMode::Sentence,
            max_batch: MAX_TARGETS,
            timeout_secs: 60,
            retries: 2,
            max_in_flight: 4,
        }
    }
}

impl LlmJudgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_batch == 0 || self.max_batch > MAX_TARGETS {
            return Err(Error::Config(format!(
                "llm max_batch must be in 1..={MAX_TARGETS}, got {}",
                self.max_batch
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("llm max_in_flight must be at least 1".into()));
        }
        if self.endpoint.is_empty() || self.model.is_empty() {
            return Err(Error::Config("llm endpoint and model are required".into()));
        }
        Ok(())
    }
}

/// One distinct hypothesis and the systems (by index) that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub hypothesis: TokenSeq,
    pub systems: Vec<usize>,
}

/// Groups identical hypotheses and keeps the `limit` most frequent, ties
/// broken by the lexicographic order of the hypothesis text.
pub fn select_candidates(hyps: &[&TokenSeq], limit: usize) -> Vec<Candidate> {
    let mut groups: BTreeMap<String, Candidate> = BTreeMap::new();
    for (system, h) in hyps.iter().enumerate() {
        groups
            .entry(h.join())
            .or_insert_with(|| Candidate {
                hypothesis: (*h).clone(),
                systems: Vec::new(),
            })
            .systems
            .push(system);
    }
    let mut ranked: Vec<(String, Candidate)> = groups.into_iter().collect();
    // stable sort keeps the BTreeMap's text order among equal frequencies
    ranked.sort_by(|a, b| b.1.systems.len().cmp(&a.1.systems.len()));
    ranked.into_iter().take(limit).map(|(_, c)| c).collect()
}

/// `[src → rep]` items joined by `; `, or `no edits`.
pub fn render_edits(source: &TokenSeq, hyp: &TokenSeq) -> String {
    let set = extract_edits(source, hyp);
    if set.is_empty() {
        return "no edits".to_string();
    }
    set.edits
        .iter()
        .map(|e| {
            format!(
                "[{} → {}]",
                source[e.src_start..e.src_end].join(" "),
                e.replacement.join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn build_prompt(source: &TokenSeq, candidates: &[Candidate], mode: JudgeMode) -> String {
    let mut prompt = format!(
        "{INSTRUCTION}\n\n\n# source\n\n{}\n\n# targets\n\n",
        source.join()
    );
    for (i, c) in candidates.iter().enumerate() {
        let target = match mode {
            JudgeMode::Sentence => c.hypothesis.join(),
            JudgeMode::Edit => render_edits(source, &c.hypothesis),
        };
        prompt.push_str(&format!("{i}. {target}\n"));
    }
    prompt
}

/// JSON schema requiring integer scores for keys `"0".."n-1"`.
pub fn response_schema(num_targets: usize) -> Value {
    let properties: serde_json::Map<String, Value> = (0..num_targets)
        .map(|i| {
            (
                i.to_string(),
                json!({"type": "integer", "minimum": MIN_SCORE, "maximum": MAX_SCORE}),
            )
        })
        .collect();
    let required: Vec<String> = (0..num_targets).map(|i| i.to_string()).collect();
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false,
    })
}

/// Validates a model reply: exactly one integer score in 1..=5 per target.
pub fn parse_scores(content: &str, num_targets: usize) -> std::result::Result<Vec<i64>, String> {
    let trimmed = content.trim();
    let trimmed = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(trimmed);
    let value: Value =
        serde_json::from_str(trimmed).map_err(|e| format!("reply is not JSON: {e}"))?;
    let obj = value.as_object().ok_or("reply is not a JSON object")?;
    if obj.len() != num_targets {
        return Err(format!("expected {num_targets} scores, got {}", obj.len()));
    }
    (0..num_targets)
        .map(|i| {
            let v = obj
                .get(&i.to_string())
                .ok_or_else(|| format!("no score for target {i}"))?;
            let score = v
                .as_i64()
                .ok_or_else(|| format!("score for target {i} is not an integer: {v}"))?;
            if (MIN_SCORE..=MAX_SCORE).contains(&score) {
                Ok(score)
            } else {
                Err(format!(
                    "score {score} for target {i} outside {MIN_SCORE}..={MAX_SCORE}"
                ))
            }
        })
        .collect()
}

/// Something that answers a judging prompt with the raw message content.
pub trait ChatBackend: Sync {
    fn complete(&self, prompt: &str, num_targets: usize) -> std::result::Result<String, String>;
}

/// OpenAI-compatible `/chat/completions` client with structured output.
#[derive(Debug, Clone)]
pub struct OpenAiChat {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl OpenAiChat {
    pub fn from_config(cfg: &LlmJudgeConfig) -> Result<Self> {
        cfg.validate()?;
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        Ok(OpenAiChat {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(cfg.timeout_secs))
                .build(),
            url: format!("{}/chat/completions", cfg.endpoint.trim_end_matches('/')),
            model: cfg.model.clone(),
            api_key,
        })
    }
}

impl ChatBackend for OpenAiChat {
    fn complete(&self, prompt: &str, num_targets: usize) -> std::result::Result<String, String> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": "scores", "strict": true, "schema": response_schema(num_targets)},
            },
        });
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp: Value = req
            .send_json(body)
            .map_err(|e| e.to_string())?
            .into_json()
            .map_err(|e| format!("response is not JSON: {e}"))?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

/// Per-system scores; `None` marks sources where the system's hypothesis was
/// not among the judged candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedScores {
    pub corpus_score: Option<f64>,
    pub sentence_scores: Vec<Option<f64>>,
}

fn judge_source(
    index: usize,
    source: &TokenSeq,
    hyps: &[&TokenSeq],
    cfg: &LlmJudgeConfig,
    backend: &dyn ChatBackend,
) -> Result<Vec<Option<f64>>> {
    let candidates = select_candidates(hyps, cfg.max_batch);
    let prompt = build_prompt(source, &candidates, cfg.mode);
    let attempts = cfg.retries + 1;
    let mut last_error = String::new();
    for attempt in 1..=attempts {
        match backend
            .complete(&prompt, candidates.len())
            .and_then(|content| parse_scores(&content, candidates.len()))
        {
            Ok(scores) => {
                let mut out = vec![None; hyps.len()];
                for (c, s) in candidates.iter().zip(scores) {
                    for &sys in &c.systems {
                        out[sys] = Some(s as f64);
                    }
                }
                return Ok(out);
            }
            Err(e) => {
                log::warn!("source {index}: attempt {attempt}/{attempts} failed: {e}");
                last_error = e;
            }
        }
    }
    Err(Error::LlmSource {
        index,
        attempts,
        message: last_error,
    })
}

/// Scores every system's hypotheses. `hyps_per_system[name][i]` must align
/// with `sources[i]`.
pub fn llm_judge(
    sources: &[TokenSeq],
    hyps_per_system: &BTreeMap<String, Vec<TokenSeq>>,
    cfg: &LlmJudgeConfig,
    backend: &dyn ChatBackend,
) -> Result<BTreeMap<String, JudgedScores>> {
    cfg.validate()?;
    if hyps_per_system.is_empty() {
        return Err(Error::usage("LLM judging needs at least one system"));
    }
    for (name, hyps) in hyps_per_system {
        check_len(&format!("hypotheses of {name}"), sources.len(), hyps.len())?;
    }
    let systems: Vec<&Vec<TokenSeq>> = hyps_per_system.values().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.max_in_flight)
        .build()
        .map_err(|e| Error::usage(format!("cannot start request pool: {e}")))?;
    let per_source: Vec<Vec<Option<f64>>> = pool.install(|| {
        sources
            .par_iter()
            .enumerate()
            .map(|(i, src)| {
                let hyps: Vec<&TokenSeq> = systems.iter().map(|s| &s[i]).collect();
                judge_source(i, src, &hyps, cfg, backend)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(hyps_per_system
        .keys()
        .enumerate()
        .map(|(k, name)| {
            let sentence_scores: Vec<Option<f64>> = per_source.iter().map(|row| row[k]).collect();
            let present: Vec<f64> = sentence_scores.iter().flatten().copied().collect();
            let corpus_score = if present.is_empty() {
                None
            } else {
                Some(present.iter().sum::<f64>() / present.len() as f64)
            };
            (
                name.clone(),
                JudgedScores {
                    corpus_score,
                    sentence_scores,
                },
            )
        })
        .collect())
}
