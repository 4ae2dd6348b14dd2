//! Per-prompt execution: generate, tag, decide, compose, persist.
//!
//! Each prompt flows through four stages — completion generation, uncertainty
//! tagging, rule-base decision, and response composition — and produces one
//! [`PipelineRecord`]. Provider failures are captured in the record's `error`
//! field rather than aborting the run; only unreadable configuration or input
//! files are fatal. Records always come back in corpus order regardless of
//! how execution interleaves, and a full run is persisted as `outputs.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Corpus, Demographic, Prompt};
use crate::provider::{CompletionProvider, GenerationRequest, ProviderError, ScriptedProvider};
use crate::rulebase::{RuleBase, RuleError, UncertaintyTag};
use crate::tagger::{self, FeatureVector, TagError, TaggerConfig};

/// Trace of one prompt's journey through the pipeline.
///
/// Invariant: `error` is `None` exactly when the tagging/decision fields
/// (`system_tag`, `action`, `rationale`, `composed_response`) are all present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub prompt_id: String,
    pub prompt_text: String,
    pub completions: Vec<String>,
    pub features: Option<FeatureVector>,
    pub system_tag: Option<UncertaintyTag>,
    pub oracle_tag: UncertaintyTag,
    pub action: Option<String>,
    pub rationale: Option<String>,
    pub composed_response: Option<String>,
    pub demographic: Demographic,
    pub latency_micros: u64,
    pub error: Option<String>,
}

impl PipelineRecord {
    /// A record that produced a valid action.
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// File paths and execution knobs for a full corpus run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub ruleset_path: PathBuf,
    pub script_path: PathBuf,
    /// Absent means the built-in tagger defaults.
    pub tagger_config_path: Option<PathBuf>,
    pub k: u32,
    pub temperature: f64,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    /// Zero out latency fields so repeated runs are byte-identical.
    pub stable: bool,
    pub ablate_hedge: bool,
    pub ablate_negation: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_path: PathBuf::new(),
            ruleset_path: PathBuf::new(),
            script_path: PathBuf::new(),
            tagger_config_path: None,
            k: 1,
            temperature: 0.7,
            output_dir: PathBuf::from("out"),
            parallelism: 1,
            stable: false,
            ablate_hedge: false,
            ablate_negation: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| PipelineError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Check that every referenced file exists before the run starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut required = vec![&self.corpus_path, &self.ruleset_path, &self.script_path];
        if let Some(tagger) = &self.tagger_config_path {
            required.push(tagger);
        }
        for path in required {
            if !path.is_file() {
                return Err(PipelineError::Config {
                    path: path.clone(),
                    message: "referenced file does not exist".to_string(),
                });
            }
        }
        if self.parallelism == 0 {
            return Err(PipelineError::Config {
                path: PathBuf::new(),
                message: "parallelism must be positive".to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Tagger(#[from] TagError),
    #[error("invalid run config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Shared, immutable dependencies for executing prompts.
pub struct RunContext {
    pub rules: RuleBase,
    pub provider: Box<dyn CompletionProvider>,
    pub tagger: TaggerConfig,
    pub k: u32,
    pub temperature: f64,
    pub parallelism: usize,
    pub stable: bool,
}

impl RunContext {
    /// Load every dependency named by the config. Returns the context and the
    /// corpus to run.
    pub fn from_config(cfg: &RunConfig) -> Result<(RunContext, Corpus), PipelineError> {
        cfg.validate()?;
        let corpus = corpus::load_corpus(&cfg.corpus_path)?;
        let rules = RuleBase::load(&cfg.ruleset_path)?;
        let provider = ScriptedProvider::from_path(&cfg.script_path)?;
        let tagger = match &cfg.tagger_config_path {
            Some(path) => TaggerConfig::load(path)?,
            None => TaggerConfig::default(),
        };
        let tagger = tagger.with_ablations(
            tagger.ablate_hedge || cfg.ablate_hedge,
            tagger.ablate_negation || cfg.ablate_negation,
        );
        tagger.validate()?;
        Ok((
            RunContext {
                rules,
                provider: Box::new(provider),
                tagger,
                k: cfg.k,
                temperature: cfg.temperature,
                parallelism: cfg.parallelism,
                stable: cfg.stable,
            },
            corpus,
        ))
    }
}

/// Execute one prompt: generate, tag, decide, compose.
///
/// The composed response is exactly
/// `Action: {action}\nExplanation: {rationale}\nResponse: {first completion}`.
pub fn run_prompt(prompt: &Prompt, ctx: &RunContext) -> PipelineRecord {
    let started = Instant::now();
    let mut record = PipelineRecord {
        prompt_id: prompt.id.clone(),
        prompt_text: prompt.text.clone(),
        completions: Vec::new(),
        features: None,
        system_tag: None,
        oracle_tag: prompt.oracle_tag,
        action: None,
        rationale: None,
        composed_response: None,
        demographic: prompt.demographic,
        latency_micros: 0,
        error: None,
    };

    let request = GenerationRequest {
        prompt_id: prompt.id.clone(),
        prompt_text: prompt.text.clone(),
        k: ctx.k,
        temperature: ctx.temperature,
    };
    match ctx.provider.generate(&request) {
        Ok(result) => {
            record.completions = result.completions.clone();
            match tagger::tag(&result.completions, result.first_logprobs(), &ctx.tagger) {
                Ok(tagged) => {
                    let decision = ctx.rules.decide(tagged.tag);
                    record.composed_response = Some(format!(
                        "Action: {}\nExplanation: {}\nResponse: {}",
                        decision.action, decision.rationale, result.completions[0]
                    ));
                    record.features = Some(tagged.features);
                    record.system_tag = Some(tagged.tag);
                    record.action = Some(decision.action);
                    record.rationale = Some(decision.rationale);
                }
                Err(e) => record.error = Some(e.to_string()),
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }

    record.latency_micros = if ctx.stable {
        0
    } else {
        started.elapsed().as_micros() as u64
    };
    record
}

/// Execute every prompt, in corpus order, with the configured parallelism.
pub fn run_prompts(corpus: &Corpus, ctx: &RunContext) -> Vec<PipelineRecord> {
    if ctx.parallelism <= 1 || corpus.len() <= 1 {
        return corpus.prompts.iter().map(|p| run_prompt(p, ctx)).collect();
    }
    let workers = ctx.parallelism.min(corpus.len());
    let mut indexed: Vec<(usize, PipelineRecord)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let prompts = &corpus.prompts;
                let ctx = &*ctx;
                scope.spawn(move || {
                    prompts
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, p)| (i, run_prompt(p, ctx)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("pipeline worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

/// Result of a full corpus run.
#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<PipelineRecord>,
    pub ok: usize,
    pub failed: usize,
    pub outputs_path: PathBuf,
}

impl RunOutcome {
    pub fn summary(&self) -> String {
        format!("run complete: {} ok, {} failed", self.ok, self.failed)
    }
}

/// Load everything named by the config, run the corpus, and write
/// `outputs.json` (a JSON array of records) into the output directory.
pub fn run_corpus(cfg: &RunConfig) -> Result<RunOutcome, PipelineError> {
    let (ctx, corpus) = RunContext::from_config(cfg)?;
    let records = run_prompts(&corpus, &ctx);
    let outputs_path = write_outputs(&records, &cfg.output_dir)?;
    let ok = records.iter().filter(|r| r.is_ok()).count();
    let failed = records.len() - ok;
    Ok(RunOutcome {
        records,
        ok,
        failed,
        outputs_path,
    })
}

/// Write records as pretty-printed JSON to `{dir}/outputs.json`.
pub fn write_outputs(
    records: &[PipelineRecord],
    dir: impl AsRef<Path>,
) -> Result<PathBuf, PipelineError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join("outputs.json");
    let mut json = serde_json::to_string_pretty(records).expect("records serialise");
    json.push('\n');
    std::fs::write(&path, json).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Read an `outputs.json` file back into records.
pub fn read_outputs(path: impl AsRef<Path>) -> Result<Vec<PipelineRecord>, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config {
        path: path.to_path_buf(),
        message: format!("malformed outputs file: {e}"),
    })
}
