//! Uncertainty-aware response governance for generated text.
//!
//! The library classifies a model completion into one of three qualitative
//! uncertainty levels (`low`, `medium`, `high`) from surface cues, consults a
//! declarative rule base to pick a behavioural action and a plain-language
//! rationale for that level, and composes the two into a structured response.
//! Around that core sit a synthetic evaluation corpus, a deterministic
//! scripted completion provider, a per-prompt execution pipeline, and the
//! metric / ablation / fairness-audit machinery used to evaluate a run.
//!
//! Modules map one-to-one onto the moving parts:
//!
//! - [`rulebase`] — fact-file parser, validation, and action/rationale lookup
//! - [`tagger`] — lexicon-driven feature extraction, scoring, thresholding
//! - [`corpus`] — prompt corpus I/O, generation, and demographic masking
//! - [`provider`] — completion-provider trait plus the scripted mock
//! - [`pipeline`] — generate → tag → decide → compose, with `outputs.json`
//! - [`metrics`] — evaluation report, readability, fairness audit, ablation

pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod provider;
pub mod rulebase;
pub mod tagger;

pub use corpus::{Corpus, Demographic, Domain, Prompt};
pub use pipeline::{PipelineRecord, RunConfig};
pub use provider::{CompletionProvider, GenerationRequest, GenerationResult, ScriptedProvider};
pub use rulebase::{Decision, Fact, RuleBase, UncertaintyTag, Virtue};
pub use tagger::{FeatureVector, TagResult, TaggerConfig};
