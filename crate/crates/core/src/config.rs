//! YAML configuration shared by both command-line tools.
//!
//! ```yaml
//! metric: gleu
//! seed: 3
//! gleu:
//!   n_max: 4
//!   iterations: 500
//! ```
//! Unknown keys are rejected. Every field has a default, and the fully
//! populated config is echoed into tool output so runs can be replayed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta_eval::TiePolicy;
use crate::ngram::{GleuConfig, GreenConfig, MultiRefMode};
use crate::sentence::{JudgeMode, LlmJudgeConfig};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub enum MetricId {
    #[default]
    #[serde(rename = "errant")]
    Errant,
    #[serde(rename = "pt-errant")]
    PtErrant,
    #[serde(rename = "gotoscorer")]
    GoToScorer,
    #[serde(rename = "gleu")]
    Gleu,
    #[serde(rename = "green")]
    Green,
    #[serde(rename = "scribendi")]
    Scribendi,
    #[serde(rename = "llm-s")]
    LlmS,
    #[serde(rename = "llm-e")]
    LlmE,
    #[serde(rename = "external")]
    External,
}

impl MetricId {
    pub const ALL: [MetricId; 9] = [
        MetricId::Errant,
        MetricId::PtErrant,
        MetricId::GoToScorer,
        MetricId::Gleu,
        MetricId::Green,
        MetricId::Scribendi,
        MetricId::LlmS,
        MetricId::LlmE,
        MetricId::External,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricId::Errant => "errant",
            MetricId::PtErrant => "pt-errant",
            MetricId::GoToScorer => "gotoscorer",
            MetricId::Gleu => "gleu",
            MetricId::Green => "green",
            MetricId::Scribendi => "scribendi",
            MetricId::LlmS => "llm-s",
            MetricId::LlmE => "llm-e",
            MetricId::External => "external",
        }
    }

    pub fn needs_references(&self) -> bool {
        matches!(
            self,
            MetricId::Errant
                | MetricId::PtErrant
                | MetricId::GoToScorer
                | MetricId::Gleu
                | MetricId::Green
        )
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = MetricId::ALL.iter().map(MetricId::as_str).collect();
                Error::Config(format!(
                    "unknown metric {s:?}; valid ids: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GleuSection {
    pub n_max: usize,
    pub iterations: usize,
}

impl Default for GleuSection {
    fn default() -> Self {
        let d = GleuConfig::default();
        GleuSection {
            n_max: d.n_max,
            iterations: d.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScribendiSection {
    pub threshold: f64,
    /// TSV of `sentence \t perplexity`.
    pub ppl_file: Option<PathBuf>,
    /// HTTP perplexity service, used when no file is given.
    pub ppl_url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for ScribendiSection {
    fn default() -> Self {
        ScribendiSection {
            threshold: crate::sentence::scribendi::DEFAULT_THRESHOLD,
            ppl_file: None,
            ppl_url: None,
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSection {
    pub tie_policy: TiePolicy,
    pub trueskill_passes: usize,
}

impl Default for MetaSection {
    fn default() -> Self {
        MetaSection {
            tie_policy: TiePolicy::Penalize,
            trueskill_passes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub metric: MetricId,
    /// Seeds GLEU reference sampling and TrueSkill shuffling.
    pub seed: u64,
    /// F-beta for the edit-level metrics.
    pub beta: f64,
    pub higher_is_better: bool,
    pub gleu: GleuSection,
    pub green: GreenConfig,
    /// PT-ERRANT style per-edit weights.
    pub edit_weights: Option<PathBuf>,
    pub scribendi: ScribendiSection,
    pub llm: LlmJudgeConfig,
    /// `system \t sentence_index \t score` rows.
    pub external_scores: Option<PathBuf>,
    pub meta: MetaSection,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metric: MetricId::Errant,
            seed: 0,
            beta: 0.5,
            higher_is_better: true,
            gleu: GleuSection::default(),
            green: GreenConfig {
                n_max: 4,
                beta: 2.0,
                multi_ref: MultiRefMode::Best,
            },
            edit_weights: None,
            scribendi: ScribendiSection::default(),
            llm: LlmJudgeConfig::default(),
            external_scores: None,
            meta: MetaSection::default(),
        }
    }
}

impl EvalConfig {
    pub fn from_yaml(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(EvalConfig::default());
        }
        serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_yaml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    /// Applies a command-line metric override, aligns derived fields and
    /// validates ranges.
    pub fn resolve(mut self, metric: Option<MetricId>) -> Result<Self> {
        if let Some(m) = metric {
            self.metric = m;
        }
        match self.metric {
            MetricId::LlmS => self.llm.mode = JudgeMode::Sentence,
            MetricId::LlmE => self.llm.mode = JudgeMode::Edit,
            _ => {}
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.green.beta > 0.0 && self.green.beta.is_finite()) {
            return bad(format!(
                "green.beta must be positive, got {}",
                self.green.beta
            ));
        }
        if self.gleu.n_max == 0 || self.green.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if self.gleu.iterations == 0 {
            return bad("gleu.iterations must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.scribendi.threshold) {
            return bad(format!(
                "scribendi.threshold must be in [0, 1], got {}",
                self.scribendi.threshold
            ));
        }
        if self.meta.trueskill_passes == 0 {
            return bad("meta.trueskill_passes must be at least 1".into());
        }
        if matches!(self.metric, MetricId::LlmS | MetricId::LlmE) {
            self.llm.validate()?;
        }
        Ok(())
    }

    pub fn gleu_config(&self) -> GleuConfig {
        GleuConfig {
            n_max: self.gleu.n_max,
            iterations: self.gleu.iterations,
            seed: self.seed,
        }
    }

    pub fn trueskill_params(&self) -> crate::meta_eval::TrueSkillParams {
        crate::meta_eval::TrueSkillParams {
            passes: self.meta.trueskill_passes,
            seed: self.seed,
            ..Default::default()
        }
    }
}
