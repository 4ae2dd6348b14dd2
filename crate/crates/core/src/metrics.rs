//! Evaluation metrics, the ablation sweep, and the fairness audit.
//!
//! Five run-level metrics are computed from aligned records and corpus:
//!
//! - **coverage** — fraction of prompts that produced a valid action
//! - **tagging accuracy** — system tag agreement with the oracle label
//! - **fairness Δ** — maximum per-action frequency gap between the male and
//!   female groups (unknown-group prompts are reported but excluded)
//! - **readability** — mean Flesch Reading Ease of the emitted rationales
//!   (higher is easier to read)
//! - **completeness** — mean ratio of rationale length to output length,
//!   in whitespace-delimited words
//!
//! Alongside the summary report the harness writes `evaluation.csv` with one
//! row per prompt, runs the four-setting cue-ablation sweep, produces the
//! oracle/system mismatch table, and compares fairness before and after
//! demographic masking. All computations are pure over immutable records;
//! repeated evaluation of the same run is byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Corpus, Demographic};
use crate::pipeline::{self, PipelineError, PipelineRecord, RunConfig, RunContext};
use crate::rulebase::UncertaintyTag;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("record/corpus alignment error: {0}")]
    Alignment(String),
    #[error("degenerate text: no words to score")]
    DegenerateText,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

// ---------------------------------------------------------------------------
// Readability and completeness
// ---------------------------------------------------------------------------

const VOWELS: [char; 6] = ['a', 'e', 'i', 'o', 'u', 'y'];

fn is_vowel(c: char) -> bool {
    VOWELS.contains(&c)
}

/// Heuristic syllable count: number of maximal vowel runs, minus one for a
/// silent trailing `e` that forms its own run, with a minimum of one for any
/// word containing letters.
fn syllables_in_word(word: &str) -> u32 {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if letters.is_empty() {
        return 0;
    }
    let mut runs = 0u32;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            runs += 1;
        }
        prev_vowel = v;
    }
    if runs > 1 && letters[letters.len() - 1] == 'e' && !is_vowel(letters[letters.len() - 2]) {
        runs -= 1;
    }
    runs.max(1)
}

/// Sentences are the segments between runs of `.`, `!`, `?` that contain at
/// least one alphanumeric character.
fn sentence_count(text: &str) -> u32 {
    text.split(['.', '!', '?'])
        .filter(|segment| segment.chars().any(char::is_alphanumeric))
        .count() as u32
}

/// Flesch Reading Ease:
/// `206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)`.
///
/// The raw value is reported unclamped; scores above 100 simply mean very
/// short, very plain text.
pub fn readability(text: &str) -> Result<f64, MetricsError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(MetricsError::DegenerateText);
    }
    let sentences = sentence_count(text).max(1);
    let syllables: u32 = words.iter().map(|w| syllables_in_word(w)).sum();
    let words = words.len() as f64;
    Ok(206.835 - 1.015 * (words / f64::from(sentences)) - 84.6 * (f64::from(syllables) / words))
}

/// Rationale length over output length, in whitespace-delimited words.
pub fn completeness(rationale: &str, output: &str) -> Result<f64, MetricsError> {
    let output_words = output.split_whitespace().count();
    if output_words == 0 {
        return Err(MetricsError::DegenerateText);
    }
    let rationale_words = rationale.split_whitespace().count();
    Ok(rationale_words as f64 / output_words as f64)
}

// ---------------------------------------------------------------------------
// Confusion matrix and evaluation report
// ---------------------------------------------------------------------------

/// 3x3 count matrix indexed oracle x system in tag order low, medium, high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u32; 3]; 3],
}

impl ConfusionMatrix {
    pub fn record(&mut self, oracle: UncertaintyTag, system: UncertaintyTag) {
        self.counts[oracle.index()][system.index()] += 1;
    }

    pub fn trace(&self) -> u32 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, oracle: UncertaintyTag) -> u32 {
        self.counts[oracle.index()].iter().sum()
    }

    /// trace / total, or 0 when no valid records exist.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            f64::from(self.trace()) / f64::from(total)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub coverage: f64,
    pub tagging_accuracy: f64,
    pub fairness_delta: f64,
    pub readability_mean: f64,
    pub completeness_mean: f64,
    pub confusion: ConfusionMatrix,
    pub n_prompts: usize,
}

/// Check that every record's prompt id exists in the corpus.
fn check_alignment(records: &[PipelineRecord], corpus: &Corpus) -> Result<(), MetricsError> {
    for record in records {
        if corpus.get(&record.prompt_id).is_none() {
            return Err(MetricsError::Alignment(format!(
                "record {} has no matching corpus prompt",
                record.prompt_id
            )));
        }
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Compute the five metrics and the confusion matrix for a run.
///
/// Failed records count against coverage's denominator and are excluded from
/// every other metric. Pure: identical inputs produce identical reports.
pub fn evaluate(records: &[PipelineRecord], corpus: &Corpus) -> Result<EvaluationReport, MetricsError> {
    check_alignment(records, corpus)?;
    let n_prompts = corpus.len();
    let valid: Vec<&PipelineRecord> = records.iter().filter(|r| r.is_ok()).collect();

    let mut confusion = ConfusionMatrix::default();
    let mut readabilities = Vec::new();
    let mut ratios = Vec::new();
    for record in &valid {
        let system = record.system_tag.expect("valid record has a system tag");
        confusion.record(record.oracle_tag, system);
        if let Some(rationale) = &record.rationale {
            if let Ok(score) = readability(rationale) {
                readabilities.push(score);
            }
            if let Some(first) = record.completions.first() {
                if let Ok(ratio) = completeness(rationale, first) {
                    ratios.push(ratio);
                }
            }
        }
    }

    let coverage = if n_prompts == 0 {
        0.0
    } else {
        valid.len() as f64 / n_prompts as f64
    };
    let fairness = fairness_audit(records, corpus)?;

    Ok(EvaluationReport {
        coverage,
        tagging_accuracy: confusion.accuracy(),
        fairness_delta: fairness.delta,
        readability_mean: mean(&readabilities),
        completeness_mean: mean(&ratios),
        confusion,
        n_prompts,
    })
}

/// Write the per-prompt `evaluation.csv`.
///
/// Columns, in order: prompt_id, domain, demographic, oracle_tag, system_tag,
/// action, flesch_reading_ease, completeness_ratio, error. UTF-8, LF line
/// endings, header row. Failed records leave the decision columns empty and
/// carry their error message.
pub fn write_evaluation_csv(
    records: &[PipelineRecord],
    corpus: &Corpus,
    path: impl AsRef<Path>,
) -> Result<(), MetricsError> {
    check_alignment(records, corpus)?;
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| MetricsError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let write = |writer: &mut csv::Writer<std::fs::File>, row: &[String]| {
        writer.write_record(row).map_err(|source| MetricsError::Csv {
            path: path.to_path_buf(),
            source,
        })
    };
    write(
        &mut writer,
        &[
            "prompt_id".into(),
            "domain".into(),
            "demographic".into(),
            "oracle_tag".into(),
            "system_tag".into(),
            "action".into(),
            "flesch_reading_ease".into(),
            "completeness_ratio".into(),
            "error".into(),
        ],
    )?;
    for record in records {
        let prompt = corpus.get(&record.prompt_id).expect("alignment checked");
        let (flesch, ratio) = match (&record.rationale, record.completions.first()) {
            (Some(rationale), Some(first)) => (
                readability(rationale).map(|v| format!("{v:.4}")).unwrap_or_default(),
                completeness(rationale, first).map(|v| format!("{v:.4}")).unwrap_or_default(),
            ),
            _ => (String::new(), String::new()),
        };
        write(
            &mut writer,
            &[
                record.prompt_id.clone(),
                prompt.domain.as_str().to_string(),
                record.demographic.as_str().to_string(),
                record.oracle_tag.as_str().to_string(),
                record.system_tag.map(|t| t.as_str().to_string()).unwrap_or_default(),
                record.action.clone().unwrap_or_default(),
                flesch,
                ratio,
                record.error.clone().unwrap_or_default(),
            ],
        )?;
    }
    writer.flush().map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Fairness audit
// ---------------------------------------------------------------------------

/// Per-group action distributions and the gender fairness gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// group -> action -> frequency among the group's valid records.
    pub per_group_action_freq: BTreeMap<String, BTreeMap<String, f64>>,
    /// Maximum over actions of |freq(male) - freq(female)|.
    pub delta: f64,
    /// Records with unknown demographic, reported but excluded from delta.
    pub excluded_unknown: usize,
}

/// Action frequencies per demographic group over valid records.
///
/// Empty groups contribute zero frequencies, so a fully masked run has
/// `delta = 0` with every prompt counted in `excluded_unknown`.
pub fn fairness_audit(
    records: &[PipelineRecord],
    corpus: &Corpus,
) -> Result<FairnessReport, MetricsError> {
    check_alignment(records, corpus)?;
    let mut group_actions: BTreeMap<Demographic, Vec<&str>> = BTreeMap::new();
    let mut excluded_unknown = 0;
    for record in records {
        if record.demographic == Demographic::Unknown {
            excluded_unknown += 1;
        }
        if let Some(action) = record.action.as_deref() {
            group_actions.entry(record.demographic).or_default().push(action);
        }
    }

    let freq_for = |group: Demographic| -> BTreeMap<String, f64> {
        let actions = group_actions.get(&group).map(Vec::as_slice).unwrap_or(&[]);
        let mut freq = BTreeMap::new();
        if actions.is_empty() {
            return freq;
        }
        let total = actions.len() as f64;
        for action in actions {
            *freq.entry(action.to_string()).or_insert(0.0) += 1.0;
        }
        for value in freq.values_mut() {
            *value /= total;
        }
        freq
    };

    let male = freq_for(Demographic::Male);
    let female = freq_for(Demographic::Female);
    let unknown = freq_for(Demographic::Unknown);

    let actions: BTreeSet<&String> = male.keys().chain(female.keys()).collect();
    let delta = actions
        .into_iter()
        .map(|action| {
            let m = male.get(action).copied().unwrap_or(0.0);
            let f = female.get(action).copied().unwrap_or(0.0);
            (m - f).abs()
        })
        .fold(0.0, f64::max);

    let mut per_group_action_freq = BTreeMap::new();
    per_group_action_freq.insert("male".to_string(), male);
    per_group_action_freq.insert("female".to_string(), female);
    per_group_action_freq.insert("unknown".to_string(), unknown);

    Ok(FairnessReport {
        per_group_action_freq,
        delta,
        excluded_unknown,
    })
}

// ---------------------------------------------------------------------------
// Masking comparison
// ---------------------------------------------------------------------------

/// Fairness audit before and after demographic masking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingComparison {
    pub original: FairnessReport,
    pub masked: FairnessReport,
}

/// Run the pipeline on the configured corpus and on its masked counterpart,
/// auditing both runs.
///
/// Completion lookup is keyed by prompt id, so the masked run replays the
/// same scripted completions; only the demographic grouping changes.
pub fn masking_comparison(cfg: &RunConfig) -> Result<MaskingComparison, MetricsError> {
    let (ctx, original_corpus) = RunContext::from_config(cfg)?;
    let masked_corpus = corpus::mask_demographics(&original_corpus);

    let original_records = pipeline::run_prompts(&original_corpus, &ctx);
    let masked_records = pipeline::run_prompts(&masked_corpus, &ctx);

    Ok(MaskingComparison {
        original: fairness_audit(&original_records, &original_corpus)?,
        masked: fairness_audit(&masked_records, &masked_corpus)?,
    })
}

// ---------------------------------------------------------------------------
// Ablation sweep
// ---------------------------------------------------------------------------

/// Tagging accuracy under the four cue-ablation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full: f64,
    pub hedge_ablated: f64,
    pub negation_ablated: f64,
    pub both_ablated: f64,
}

impl AblationReport {
    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("full", self.full),
            ("hedge_ablated", self.hedge_ablated),
            ("negation_ablated", self.negation_ablated),
            ("both_ablated", self.both_ablated),
        ]
    }
}

/// Tagging accuracy over valid records only.
pub fn tagging_accuracy(records: &[PipelineRecord]) -> f64 {
    let mut confusion = ConfusionMatrix::default();
    for record in records.iter().filter(|r| r.is_ok()) {
        confusion.record(record.oracle_tag, record.system_tag.expect("valid record"));
    }
    confusion.accuracy()
}

/// Four pipeline passes against identical scripted completions, toggling the
/// hedge and negation switches.
pub fn ablation_sweep(cfg: &RunConfig) -> Result<AblationReport, MetricsError> {
    let (mut ctx, corpus) = RunContext::from_config(cfg)?;
    let base = ctx.tagger.clone();
    let mut run = |ablate_hedge: bool, ablate_negation: bool| {
        ctx.tagger = base.with_ablations(ablate_hedge, ablate_negation);
        tagging_accuracy(&pipeline::run_prompts(&corpus, &ctx))
    };
    Ok(AblationReport {
        full: run(false, false),
        hedge_ablated: run(true, false),
        negation_ablated: run(false, true),
        both_ablated: run(true, true),
    })
}

// ---------------------------------------------------------------------------
// Error analysis
// ---------------------------------------------------------------------------

/// One oracle/system disagreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    pub prompt_id: String,
    pub oracle: UncertaintyTag,
    pub system: UncertaintyTag,
    /// First 60 characters of the displayed completion.
    pub excerpt: String,
}

fn truncate_chars(text: &str, limit: usize) -> String {
    text.chars().take(limit).collect()
}

/// Mismatch table: one row per valid record whose system tag differs from the
/// oracle, sorted by prompt id.
pub fn error_analysis(
    records: &[PipelineRecord],
    corpus: &Corpus,
) -> Result<Vec<MismatchRow>, MetricsError> {
    check_alignment(records, corpus)?;
    let mut rows: Vec<MismatchRow> = records
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| {
            let system = r.system_tag?;
            if system == r.oracle_tag {
                return None;
            }
            Some(MismatchRow {
                prompt_id: r.prompt_id.clone(),
                oracle: r.oracle_tag,
                system,
                excerpt: truncate_chars(r.completions.first().map(String::as_str).unwrap_or(""), 60),
            })
        })
        .collect();
    rows.sort_by(|a, b| a.prompt_id.cmp(&b.prompt_id));
    Ok(rows)
}

/// Serialise any report as pretty JSON with a trailing newline.
pub fn write_json_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let mut json = serde_json::to_string_pretty(report).expect("report serialises");
    json.push('\n');
    std::fs::write(path, json).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}
