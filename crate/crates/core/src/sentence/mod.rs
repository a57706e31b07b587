//! Reference-free sentence-level metrics.

pub mod external;
pub mod llm;
pub mod perplexity;
pub mod scribendi;

pub use external::{load_external_scores, ExternalScoreTable};
pub use llm::{llm_judge, JudgeMode, JudgedScores, LlmJudgeConfig};
pub use perplexity::{HttpPerplexity, PerplexityProvider, PerplexityTable};
pub use scribendi::{levenshtein_ratio, scribendi, token_sort_ratio};
