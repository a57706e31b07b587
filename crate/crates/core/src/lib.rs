//! Grammatical error correction metrics and their meta-evaluation.
//!
//! Metrics fall into three families:
//!
//! * edit-level ([`edit_metrics`]): weighted precision/recall/F-beta over
//!   edits extracted by [`align`],
//! * n-gram level ([`ngram`]): GLEU and GREEN on the n-gram Venn decomposition,
//! * sentence level ([`sentence`]): Scribendi, LLM judging and externally
//!   computed scores.
//!
//! [`meta_eval`] correlates any of them with human judgments and
//! [`analysis`] produces window and pairwise breakdowns.

pub mod align;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod edit_metrics;
pub mod error;
pub mod m2;
pub mod meta_eval;
pub mod ngram;
pub mod runner;
pub mod sentence;
pub mod types;

pub use error::{Error, Result};
pub use types::{f_beta, tokenize, Edit, EditSet, MetricResult, PRFScore, TokenSeq, WeightedEdit};
