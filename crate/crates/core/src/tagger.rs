//! Surface-cue uncertainty tagging.
//!
//! A completion is scored from four features: hedge-phrase occurrences,
//! negation/impossibility-phrase occurrences, disagreement across an ensemble
//! of completions, and (when available) mean token log-probability. The score
//! is thresholded into `low` / `medium` / `high`, with ties resolved toward
//! the more cautious tag. Each cue family has an ablation switch so its
//! contribution can be measured in isolation.
//!
//! Phrase matching is case-insensitive over whitespace-normalised words;
//! multi-word phrases match as contiguous word sequences, longest match
//! first, so `may not be reliable` is a single hedge hit rather than a `may`
//! hit plus leftovers. Counts come from the first completion (the one shown
//! to the user); disagreement is computed across all of them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rulebase::UncertaintyTag;

/// Scores within this distance of a threshold resolve to the higher tag.
const THRESHOLD_EPSILON: f64 = 1e-9;

/// Hedge-hit contributions saturate at this count.
const HEDGE_CAP: u32 = 3;
/// Negation-hit contributions saturate at this count.
const NEGATION_CAP: u32 = 2;
/// A mean token log-probability of -5 or worse maps to the full penalty.
const LOGPROB_FLOOR: f64 = 5.0;

fn default_hedge_lexicon() -> Vec<String> {
    [
        "may",
        "might",
        "possibly",
        "could",
        "unclear",
        "uncertain",
        "not certain",
        "roughly",
        "approximately",
        "suggest",
        "likely",
        "potentially",
        "estimated",
        "may not be reliable",
        "not yet been finalised",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

fn default_negation_lexicon() -> Vec<String> {
    [
        "insufficient evidence",
        "not possible to determine",
        "cannot determine",
        "no evidence",
        "cannot be confirmed",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

fn default_weight_hedge() -> f64 {
    0.5
}
fn default_weight_negation() -> f64 {
    1.0
}
fn default_weight_variance() -> f64 {
    0.4
}
fn default_weight_logprob() -> f64 {
    0.3
}
fn default_threshold_medium() -> f64 {
    0.30
}
fn default_threshold_high() -> f64 {
    0.45
}

/// Lexicons, weights, thresholds, and ablation switches for the tagger.
///
/// The calibrated constants live in configuration, not code: the shipped
/// defaults are reproduced by `fixtures/tagger/default.toml` and any field
/// can be overridden from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub hedge_lexicon: Vec<String>,
    pub negation_lexicon: Vec<String>,
    pub weight_hedge: f64,
    pub weight_negation: f64,
    pub weight_variance: f64,
    pub weight_logprob: f64,
    /// Score at or above this tags at least `medium`.
    pub threshold_medium: f64,
    /// Score at or above this tags `high`.
    pub threshold_high: f64,
    pub ablate_hedge: bool,
    pub ablate_negation: bool,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            hedge_lexicon: default_hedge_lexicon(),
            negation_lexicon: default_negation_lexicon(),
            weight_hedge: default_weight_hedge(),
            weight_negation: default_weight_negation(),
            weight_variance: default_weight_variance(),
            weight_logprob: default_weight_logprob(),
            threshold_medium: default_threshold_medium(),
            threshold_high: default_threshold_high(),
            ablate_hedge: false,
            ablate_negation: false,
        }
    }
}

impl TaggerConfig {
    /// Load a config file (TOML key/value with lexicons as string arrays);
    /// absent keys fall back to the built-in defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<TaggerConfig, TagError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TagError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: TaggerConfig = toml::from_str(&text).map_err(|e| TagError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TagError> {
        let mut problems = Vec::new();
        if !(self.threshold_medium >= 0.0 && self.threshold_medium < self.threshold_high) {
            problems.push(format!(
                "thresholds must satisfy 0 <= medium < high (got {} and {})",
                self.threshold_medium, self.threshold_high
            ));
        }
        for (name, w) in [
            ("weight_hedge", self.weight_hedge),
            ("weight_negation", self.weight_negation),
            ("weight_variance", self.weight_variance),
            ("weight_logprob", self.weight_logprob),
        ] {
            if !(w >= 0.0) {
                problems.push(format!("{name} must be nonnegative (got {w})"));
            }
        }
        if !self.ablate_hedge && self.hedge_lexicon.is_empty() {
            problems.push("hedge lexicon is empty but hedges are not ablated".to_string());
        }
        if !self.ablate_negation && self.negation_lexicon.is_empty() {
            problems.push("negation lexicon is empty but negations are not ablated".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TagError::Config {
                path: PathBuf::new(),
                message: problems.join("; "),
            })
        }
    }

    /// A copy with the given ablation switches applied.
    pub fn with_ablations(&self, ablate_hedge: bool, ablate_negation: bool) -> TaggerConfig {
        TaggerConfig {
            ablate_hedge,
            ablate_negation,
            ..self.clone()
        }
    }
}

/// Per-completion cue counts and ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub hedge_hits: u32,
    pub negation_hits: u32,
    /// `1 - mean pairwise Jaccard similarity` over completion word sets; 0 for k=1.
    pub ensemble_disagreement: f64,
    pub mean_logprob: Option<f64>,
    pub word_count: u32,
}

/// Tag plus the score and features that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagResult {
    pub tag: UncertaintyTag,
    pub score: f64,
    pub features: FeatureVector,
}

#[derive(Debug, Error)]
pub enum TagError {
    #[error("no completions to tag, or the first completion has no words")]
    EmptyInput,
    #[error("invalid tagger config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("cannot read tagger config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercase a token and strip leading/trailing non-alphanumerics.
///
/// Punctuation-only tokens become empty strings; they are kept in place so a
/// dash or ellipsis still breaks phrase contiguity.
fn normalize_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

fn normalized_words(text: &str) -> Vec<String> {
    text.split_whitespace().map(normalize_token).collect()
}

#[derive(Clone, Copy, PartialEq)]
enum CueKind {
    Hedge,
    Negation,
}

/// Count cue-phrase occurrences in one pass, longest phrase first.
fn count_cues(words: &[String], cfg: &TaggerConfig) -> (u32, u32) {
    let mut phrases: Vec<(Vec<String>, CueKind)> = Vec::new();
    if !cfg.ablate_hedge {
        for p in &cfg.hedge_lexicon {
            phrases.push((normalized_words(p), CueKind::Hedge));
        }
    }
    if !cfg.ablate_negation {
        for p in &cfg.negation_lexicon {
            phrases.push((normalized_words(p), CueKind::Negation));
        }
    }
    phrases.retain(|(words, _)| !words.is_empty());
    phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()));

    let mut hedge = 0;
    let mut negation = 0;
    let mut i = 0;
    while i < words.len() {
        let mut advanced = false;
        for (phrase, kind) in &phrases {
            let len = phrase.len();
            if i + len <= words.len() && words[i..i + len] == phrase[..] {
                match kind {
                    CueKind::Hedge => hedge += 1,
                    CueKind::Negation => negation += 1,
                }
                i += len;
                advanced = true;
                break;
            }
        }
        if !advanced {
            i += 1;
        }
    }
    (hedge, negation)
}

/// Mean pairwise Jaccard similarity over lowercased word sets.
fn mean_pairwise_jaccard(completions: &[String]) -> f64 {
    let sets: Vec<BTreeSet<String>> = completions
        .iter()
        .map(|c| {
            normalized_words(c)
                .into_iter()
                .filter(|w| !w.is_empty())
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0u32;
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let intersection = sets[i].intersection(&sets[j]).count();
            let union = sets[i].union(&sets[j]).count();
            // two empty word sets are identical
            let similarity = if union == 0 {
                1.0
            } else {
                intersection as f64 / union as f64
            };
            total += similarity;
            pairs += 1;
        }
    }
    if pairs == 0 {
        1.0
    } else {
        total / f64::from(pairs)
    }
}

/// Extract cue counts and ensemble statistics from a set of completions.
///
/// Counts are taken on the first completion; `logprobs`, when provided, are
/// the per-token log-probabilities of that same completion. Ablated cue
/// families report zero hits.
pub fn extract_features(
    completions: &[String],
    logprobs: Option<&[f64]>,
    cfg: &TaggerConfig,
) -> Result<FeatureVector, TagError> {
    let first = completions.first().ok_or(TagError::EmptyInput)?;
    let word_count = first.split_whitespace().count() as u32;
    if word_count == 0 {
        return Err(TagError::EmptyInput);
    }
    let words = normalized_words(first);
    let (hedge_hits, negation_hits) = count_cues(&words, cfg);
    let ensemble_disagreement = if completions.len() < 2 {
        0.0
    } else {
        1.0 - mean_pairwise_jaccard(completions)
    };
    let mean_logprob = logprobs.filter(|l| !l.is_empty()).map(|l| {
        l.iter().sum::<f64>() / l.len() as f64
    });
    Ok(FeatureVector {
        hedge_hits,
        negation_hits,
        ensemble_disagreement,
        mean_logprob,
        word_count,
    })
}

/// Combine features into a single uncertainty score.
///
/// `weight_hedge * min(hedge_hits, 3)/3 + weight_negation * min(negation_hits, 2)/2
///  + weight_variance * disagreement + weight_logprob * penalty`, where the
/// log-probability penalty is `clamp(-mean_logprob / 5, 0, 1)` and zero when
/// no log-probabilities were supplied. Monotone nondecreasing in every feature.
pub fn score(features: &FeatureVector, cfg: &TaggerConfig) -> f64 {
    let hedge = f64::from(features.hedge_hits.min(HEDGE_CAP)) / f64::from(HEDGE_CAP);
    let negation = f64::from(features.negation_hits.min(NEGATION_CAP)) / f64::from(NEGATION_CAP);
    let logprob_penalty = features
        .mean_logprob
        .map(|m| (-m / LOGPROB_FLOOR).clamp(0.0, 1.0))
        .unwrap_or(0.0);
    cfg.weight_hedge * hedge
        + cfg.weight_negation * negation
        + cfg.weight_variance * features.ensemble_disagreement
        + cfg.weight_logprob * logprob_penalty
}

/// Threshold a score into a tag. Scores within 1e-9 of a threshold resolve
/// to the higher (more cautious) tag.
pub fn tag_for_score(score: f64, cfg: &TaggerConfig) -> UncertaintyTag {
    if score >= cfg.threshold_high - THRESHOLD_EPSILON {
        UncertaintyTag::High
    } else if score >= cfg.threshold_medium - THRESHOLD_EPSILON {
        UncertaintyTag::Medium
    } else {
        UncertaintyTag::Low
    }
}

/// Tag a set of completions: extract features, score, threshold.
pub fn tag(
    completions: &[String],
    logprobs: Option<&[f64]>,
    cfg: &TaggerConfig,
) -> Result<TagResult, TagError> {
    let features = extract_features(completions, logprobs, cfg)?;
    let score = score(&features, cfg);
    Ok(TagResult {
        tag: tag_for_score(score, cfg),
        score,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(text: &str) -> Vec<String> {
        vec![text.to_string()]
    }

    #[test]
    fn cue_free_text_has_zero_features() {
        let f = extract_features(&single("The answer is 42."), None, &TaggerConfig::default())
            .unwrap();
        assert_eq!(f.hedge_hits, 0);
        assert_eq!(f.negation_hits, 0);
        assert_eq!(f.ensemble_disagreement, 0.0);
        assert_eq!(f.mean_logprob, None);
        assert_eq!(f.word_count, 4);
    }

    #[test]
    fn unclear_counts_as_a_hedge() {
        let f = extract_features(
            &single("... it is unclear how this will affect outcomes"),
            None,
            &TaggerConfig::default(),
        )
        .unwrap();
        assert!(f.hedge_hits >= 1);
    }

    #[test]
    fn disagreement_extremes() {
        let cfg = TaggerConfig::default();
        let identical = vec!["x y z".to_string(), "x y z".to_string()];
        assert_eq!(extract_features(&identical, None, &cfg).unwrap().ensemble_disagreement, 0.0);
        let disjoint = vec!["a b".to_string(), "c d".to_string()];
        assert_eq!(extract_features(&disjoint, None, &cfg).unwrap().ensemble_disagreement, 1.0);
    }

    #[test]
    fn single_completion_has_zero_disagreement() {
        let f = extract_features(&single("anything at all"), None, &TaggerConfig::default())
            .unwrap();
        assert_eq!(f.ensemble_disagreement, 0.0);
    }

    #[test]
    fn empty_input_is_rejected() {
        let cfg = TaggerConfig::default();
        assert!(matches!(extract_features(&[], None, &cfg), Err(TagError::EmptyInput)));
        assert!(matches!(
            extract_features(&single("   "), None, &cfg),
            Err(TagError::EmptyInput)
        ));
    }

    #[test]
    fn score_zero_for_zero_features() {
        let f = FeatureVector {
            hedge_hits: 0,
            negation_hits: 0,
            ensemble_disagreement: 0.0,
            mean_logprob: None,
            word_count: 1,
        };
        assert_eq!(score(&f, &TaggerConfig::default()), 0.0);
    }

    #[test]
    fn score_saturated_hedges_equal_hedge_weight() {
        let f = FeatureVector {
            hedge_hits: 3,
            negation_hits: 0,
            ensemble_disagreement: 0.0,
            mean_logprob: None,
            word_count: 1,
        };
        let cfg = TaggerConfig {
            weight_hedge: 0.5,
            ..TaggerConfig::default()
        };
        assert!((score(&f, &cfg) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn score_saturated_negations_equal_negation_weight() {
        let f = FeatureVector {
            hedge_hits: 0,
            negation_hits: 2,
            ensemble_disagreement: 0.0,
            mean_logprob: None,
            word_count: 1,
        };
        let cfg = TaggerConfig {
            weight_negation: 0.7,
            ..TaggerConfig::default()
        };
        assert!((score(&f, &cfg) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn logprob_penalty_clamps() {
        let cfg = TaggerConfig {
            weight_logprob: 1.0,
            ..TaggerConfig::default()
        };
        let mut f = FeatureVector {
            hedge_hits: 0,
            negation_hits: 0,
            ensemble_disagreement: 0.0,
            mean_logprob: Some(-10.0),
            word_count: 1,
        };
        assert!((score(&f, &cfg) - 1.0).abs() < 1e-12);
        f.mean_logprob = Some(-2.5);
        assert!((score(&f, &cfg) - 0.5).abs() < 1e-12);
        f.mean_logprob = Some(0.0);
        assert_eq!(score(&f, &cfg), 0.0);
    }

    #[test]
    fn micro_case_texts_tag_low_medium_high() {
        let cfg = TaggerConfig::default();
        let high = tag(
            &single("There is insufficient evidence to make a precise attribution."),
            None,
            &cfg,
        )
        .unwrap();
        assert_eq!(high.tag, UncertaintyTag::High);

        let medium = tag(
            &single("Fuel expenses could rise by 4\u{2013}6%, but compensatory rebates have not yet been finalised."),
            None,
            &cfg,
        )
        .unwrap();
        assert_eq!(medium.tag, UncertaintyTag::Medium);

        let low = tag(
            &single("With current electricity prices and a 30% federal tax credit, the pay-back horizon is roughly seven years."),
            None,
            &cfg,
        )
        .unwrap();
        assert_eq!(low.tag, UncertaintyTag::Low);
    }

    #[test]
    fn longest_match_wins_over_embedded_cues() {
        let cfg = TaggerConfig::default();
        // "may not be reliable" is one hedge hit, not "may" plus leftovers,
        // and "not certain" is one hit rather than a bare negator.
        let f = extract_features(&single("results may not be reliable here"), None, &cfg).unwrap();
        assert_eq!(f.hedge_hits, 1);
        assert_eq!(f.negation_hits, 0);
        let f = extract_features(&single("the figure is not certain"), None, &cfg).unwrap();
        assert_eq!(f.hedge_hits, 1);
        assert_eq!(f.negation_hits, 0);
    }

    #[test]
    fn punctuation_does_not_hide_cues() {
        let cfg = TaggerConfig::default();
        let f = extract_features(
            &single("Rebates have not yet been finalised."),
            None,
            &cfg,
        )
        .unwrap();
        assert_eq!(f.hedge_hits, 1);
    }

    #[test]
    fn ablation_zeroes_the_feature() {
        let text = single("It is unclear whether there is insufficient evidence.");
        let full = TaggerConfig::default();
        let f = extract_features(&text, None, &full).unwrap();
        assert_eq!((f.hedge_hits, f.negation_hits), (1, 1));

        let f = extract_features(&text, None, &full.with_ablations(true, false)).unwrap();
        assert_eq!((f.hedge_hits, f.negation_hits), (0, 1));
        let f = extract_features(&text, None, &full.with_ablations(false, true)).unwrap();
        assert_eq!((f.hedge_hits, f.negation_hits), (1, 0));
        let f = extract_features(&text, None, &full.with_ablations(true, true)).unwrap();
        assert_eq!((f.hedge_hits, f.negation_hits), (0, 0));
    }

    #[test]
    fn boundary_score_takes_the_higher_tag() {
        let cfg = TaggerConfig::default();
        assert_eq!(tag_for_score(cfg.threshold_high, &cfg), UncertaintyTag::High);
        assert_eq!(
            tag_for_score(cfg.threshold_high - 5e-10, &cfg),
            UncertaintyTag::High
        );
        assert_eq!(tag_for_score(cfg.threshold_medium, &cfg), UncertaintyTag::Medium);
        assert_eq!(
            tag_for_score(cfg.threshold_medium - 1e-3, &cfg),
            UncertaintyTag::Low
        );
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut cfg = TaggerConfig::default();
        cfg.threshold_medium = 0.9;
        assert!(cfg.validate().is_err());

        let mut cfg = TaggerConfig::default();
        cfg.weight_hedge = -0.1;
        assert!(cfg.validate().is_err());

        let mut cfg = TaggerConfig::default();
        cfg.hedge_lexicon.clear();
        assert!(cfg.validate().is_err());
        cfg.ablate_hedge = true;
        assert!(cfg.validate().is_ok());
    }

    // word pool with no cue phrases in it
    fn filler() -> impl Strategy<Value = String> {
        prop::sample::select(vec![
            "the", "report", "shows", "steady", "figures", "for", "quarter", "and", "beyond",
            "team", "review", "data", "table",
        ])
        .prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn appending_a_hedge_never_lowers_the_tag(words in prop::collection::vec(filler(), 1..12)) {
            let cfg = TaggerConfig::default();
            let base = words.join(" ");
            let hedged = format!("{base} possibly");
            let before = tag(&[base], None, &cfg).unwrap();
            let after = tag(&[hedged], None, &cfg).unwrap();
            prop_assert!(after.tag >= before.tag);
            prop_assert!(after.score >= before.score);
        }

        #[test]
        fn ablated_score_never_exceeds_full_score(words in prop::collection::vec(
            prop_oneof![
                filler(),
                Just("possibly".to_string()),
                Just("unclear".to_string()),
                Just("cannot".to_string()),
                Just("determine".to_string()),
                Just("no".to_string()),
                Just("evidence".to_string()),
            ],
            1..16,
        )) {
            let text = vec![words.join(" ")];
            let full = TaggerConfig::default();
            for (ah, an) in [(true, false), (false, true), (true, true)] {
                let ablated = full.with_ablations(ah, an);
                let s_full = score(&extract_features(&text, None, &full).unwrap(), &full);
                let s_ablated = score(&extract_features(&text, None, &ablated).unwrap(), &ablated);
                prop_assert!(s_ablated <= s_full + 1e-12);
            }
        }

        #[test]
        fn uppercasing_changes_no_counts(words in prop::collection::vec(
            prop_oneof![filler(), Just("unclear".to_string()), Just("insufficient".to_string()), Just("evidence".to_string())],
            1..16,
        )) {
            let cfg = TaggerConfig::default();
            let text = words.join(" ");
            let lower = extract_features(&[text.clone()], None, &cfg).unwrap();
            let upper = extract_features(&[text.to_uppercase()], None, &cfg).unwrap();
            prop_assert_eq!(lower.hedge_hits, upper.hedge_hits);
            prop_assert_eq!(lower.negation_hits, upper.negation_hits);
        }

        #[test]
        fn tagging_is_deterministic(words in prop::collection::vec(filler(), 1..10)) {
            let cfg = TaggerConfig::default();
            let text = vec![words.join(" ")];
            let a = tag(&text, Some(&[-0.5, -1.0]), &cfg).unwrap();
            let b = tag(&text, Some(&[-0.5, -1.0]), &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
