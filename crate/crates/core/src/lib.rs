//! Character-level script purity scoring for language-model outputs.
//!
//! The pipeline: [`textnorm::normalize`] the raw output, classify every
//! scalar value under a [`ScriptPolicy`], compute the Other-Language Rate
//! and Pass@TC ([`metrics`]), then roll records up per task family and into
//! macro/micro averages ([`aggregate`]). [`dpo`] reuses the same scores to
//! build preference pairs.

pub mod aggregate;
pub mod config;
pub mod corpus;
pub mod dpo;
pub mod error;
pub mod metrics;
pub mod render;
pub mod script_policy;
pub mod textnorm;

pub use aggregate::{AggregateReport, Comparison, FamilyStats};
pub use corpus::{DecodingConfig, GenerationRecord, PromptRecord, ScoreRecord, TaskFamily};
pub use error::{Error, Result};
pub use metrics::{score, score_batch, PurityScore};
pub use script_policy::{classify, CharClass, CharVerdict, ScriptPolicy};
pub use textnorm::{normalize, NormalizedText};
