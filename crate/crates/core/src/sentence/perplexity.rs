use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::tokenize;

/// Language-model perplexity of a space-joined sentence.
pub trait PerplexityProvider: Sync {
    fn perplexity(&self, sentence: &str) -> std::result::Result<f64, String>;
}

/// Perplexities precomputed offline, keyed by whitespace-normalized sentence.
#[derive(Debug, Clone, Default)]
pub struct PerplexityTable {
    map: HashMap<String, f64>,
}

impl PerplexityTable {
    pub fn insert(&mut self, sentence: &str, ppl: f64) -> Result<()> {
        if !(ppl > 0.0) || !ppl.is_finite() {
            return Err(Error::Validation(format!(
                "perplexity must be positive, got {ppl} for {sentence:?}"
            )));
        }
        self.map.insert(tokenize(sentence).join(), ppl);
        Ok(())
    }

    /// Reads `sentence \t perplexity` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = PerplexityTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((sentence, ppl)) = line.rsplit_once('\t') else {
                return Err(Error::parse(
                    path,
                    i + 1,
                    "expected `sentence \\t perplexity`",
                ));
            };
            let ppl: f64 = ppl
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad perplexity {ppl:?}")))?;
            table
                .insert(sentence, ppl)
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl PerplexityProvider for PerplexityTable {
    fn perplexity(&self, sentence: &str) -> std::result::Result<f64, String> {
        self.map
            .get(&tokenize(sentence).join())
            .copied()
            .ok_or_else(|| format!("no perplexity for {sentence:?}"))
    }
}

#[derive(Serialize)]
struct PplRequest<'a> {
    sentence: &'a str,
}

#[derive(Deserialize)]
struct PplResponse {
    perplexity: f64,
}

/// Perplexity served over HTTP: `POST url` with `{"sentence": ...}`,
/// answered by `{"perplexity": <positive number>}`.
#[derive(Debug, Clone)]
pub struct HttpPerplexity {
    url: String,
    agent: ureq::Agent,
}

impl HttpPerplexity {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpPerplexity {
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl PerplexityProvider for HttpPerplexity {
    fn perplexity(&self, sentence: &str) -> std::result::Result<f64, String> {
        let resp: PplResponse = self
            .agent
            .post(&self.url)
            .send_json(PplRequest { sentence })
            .map_err(|e| e.to_string())?
            .into_json()
            .map_err(|e| e.to_string())?;
        if resp.perplexity > 0.0 && resp.perplexity.is_finite() {
            Ok(resp.perplexity)
        } else {
            Err(format!("non-positive perplexity {}", resp.perplexity))
        }
    }
}
