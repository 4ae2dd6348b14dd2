//! `caveat` — one binary, one subcommand per operation.
//!
//! Exit codes: 0 on success, 1 on runtime failure (diagnostic on stderr),
//! 2 on usage errors. Machine-readable outputs always go to files under
//! `--out`; stdout carries human-readable summaries (or JSON/CSV when
//! `--format` says so).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use caveat::corpus;
use caveat::metrics::{self, AblationReport, EvaluationReport, FairnessReport, MaskingComparison};
use caveat::pipeline::{self, RunConfig};
use caveat::rulebase::{RuleBase, UncertaintyTag};
use caveat::tagger::{self, TaggerConfig};

#[derive(Parser)]
#[command(name = "caveat", version, about = "Uncertainty-aware response governance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tag a text, consult the rules, and print the composed response
    Respond(RespondArgs),
    /// Run the pipeline over a corpus and write outputs.json
    Run(RunArgs),
    /// Compute metrics for a finished run; writes evaluation.csv and a summary
    Evaluate(EvaluateArgs),
    /// Fairness audit before and after demographic masking
    Audit(AuditArgs),
    /// Tagging accuracy under the four cue-ablation settings
    Ablate(AblateArgs),
    /// Generate the default 20-prompt corpus deterministically
    GenCorpus(GenCorpusArgs),
    /// Parse a rule file and check the totality invariant
    ValidateRules(ValidateRulesArgs),
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("source").required(true).args(["text", "prompt_file"])
))]
struct RespondArgs {
    /// Text to govern (mutually exclusive with --prompt-file)
    #[arg(long)]
    text: Option<String>,
    /// Read the text from a file instead
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// Rule file to decide with
    #[arg(long)]
    rules: PathBuf,
    /// Tagger config; built-in defaults when omitted
    #[arg(long)]
    tagger_config: Option<PathBuf>,
}

/// Flags shared by every pipeline-running subcommand. Precedence is
/// flags > config file > built-in defaults.
#[derive(Args)]
struct SweepArgs {
    /// Run config file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    tagger_config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Output directory for machine-readable files
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Zero latency fields for byte-stable outputs
    #[arg(long)]
    stable: bool,
    /// Disable hedge cues in the tagger
    #[arg(long)]
    ablate_hedge: bool,
    /// Disable negation cues in the tagger
    #[arg(long)]
    ablate_negation: bool,
}

impl SweepArgs {
    fn to_run_config(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
            None => RunConfig::default(),
        };
        if let Some(corpus) = &self.corpus {
            cfg.corpus_path = corpus.clone();
        }
        if let Some(rules) = &self.rules {
            cfg.ruleset_path = rules.clone();
        }
        if let Some(script) = &self.script {
            cfg.script_path = script.clone();
        }
        if let Some(tagger_config) = &self.tagger_config {
            cfg.tagger_config_path = Some(tagger_config.clone());
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(temperature) = self.temperature {
            cfg.temperature = temperature;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(parallelism) = self.parallelism {
            cfg.parallelism = parallelism;
        }
        cfg.stable |= self.stable;
        cfg.ablate_hedge |= self.ablate_hedge;
        cfg.ablate_negation |= self.ablate_negation;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run config; supplies records/corpus/out paths when flags are omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// outputs.json from a previous run
    #[arg(long, required_unless_present = "config")]
    records: Option<PathBuf>,
    /// Corpus the run was executed against
    #[arg(long, required_unless_present = "config")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for flag uniformity; evaluation outputs are always byte-stable
    #[arg(long)]
    stable: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory to write default.jsonl into
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateRulesArgs {
    /// Rule file to check
    path: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OutputFormat {
    Table,
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Respond(args) => respond(args),
        Command::Run(args) => run(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Audit(args) => audit(args),
        Command::Ablate(args) => ablate(args),
        Command::GenCorpus(args) => gen_corpus(args),
        Command::ValidateRules(args) => validate_rules(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn respond(args: RespondArgs) -> Result<(), String> {
    let text = match (args.text, args.prompt_file) {
        (Some(text), _) => text,
        (_, Some(path)) => std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let rules = RuleBase::load(&args.rules).map_err(|e| e.to_string())?;
    warn_skipped(&rules);
    let tagger_cfg = load_tagger(args.tagger_config.as_deref())?;
    let completions = vec![text];
    let tagged = tagger::tag(&completions, None, &tagger_cfg).map_err(|e| e.to_string())?;
    let decision = rules.decide(tagged.tag);
    println!(
        "Action: {}\nExplanation: {}\nResponse: {}",
        decision.action, decision.rationale, completions[0]
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<(), String> {
    let cfg = args.sweep.to_run_config()?;
    let outcome = pipeline::run_corpus(&cfg).map_err(|e| e.to_string())?;
    eprintln!("{}", outcome.summary());
    println!("wrote {}", outcome.outputs_path.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), String> {
    let run_cfg = match &args.config {
        Some(path) => Some(RunConfig::load(path).map_err(|e| e.to_string())?),
        None => None,
    };
    let records_path = args
        .records
        .or_else(|| run_cfg.as_ref().map(|c| c.output_dir.join("outputs.json")))
        .expect("clap requires --records without --config");
    let corpus_path = args
        .corpus
        .or_else(|| run_cfg.as_ref().map(|c| c.corpus_path.clone()))
        .expect("clap requires --corpus without --config");
    let out = args
        .out
        .or_else(|| run_cfg.as_ref().map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));

    let records = pipeline::read_outputs(&records_path).map_err(|e| e.to_string())?;
    let corpus = corpus::load_corpus(&corpus_path).map_err(|e| e.to_string())?;
    let report = metrics::evaluate(&records, &corpus).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let csv_path = out.join("evaluation.csv");
    metrics::write_evaluation_csv(&records, &corpus, &csv_path).map_err(|e| e.to_string())?;
    let summary_path = out.join("evaluation_summary.json");
    metrics::write_json_report(&report, &summary_path).map_err(|e| e.to_string())?;

    match args.format {
        OutputFormat::Table => print!("{}", evaluation_table(&report)),
        OutputFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"))
        }
        OutputFormat::Csv => {
            let text = std::fs::read_to_string(&csv_path)
                .map_err(|e| format!("cannot read {}: {e}", csv_path.display()))?;
            print!("{text}");
        }
    }
    eprintln!("wrote {} and {}", csv_path.display(), summary_path.display());
    Ok(())
}

fn audit(args: AuditArgs) -> Result<(), String> {
    let cfg = args.sweep.to_run_config()?;
    let comparison = metrics::masking_comparison(&cfg).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.output_dir.display()))?;
    let path = cfg.output_dir.join("fairness_audit.json");
    metrics::write_json_report(&comparison, &path).map_err(|e| e.to_string())?;

    match args.format {
        OutputFormat::Table => print!("{}", masking_table(&comparison)),
        OutputFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&comparison).expect("report serialises"))
        }
        OutputFormat::Csv => print!("{}", masking_csv(&comparison)),
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<(), String> {
    let cfg = args.sweep.to_run_config()?;
    let report = metrics::ablation_sweep(&cfg).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.output_dir.display()))?;
    let path = cfg.output_dir.join("ablation.json");
    metrics::write_json_report(&report, &path).map_err(|e| e.to_string())?;

    match args.format {
        OutputFormat::Table => print!("{}", ablation_table(&report)),
        OutputFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"))
        }
        OutputFormat::Csv => {
            let mut out = String::from("setting,tagging_accuracy\n");
            for (name, accuracy) in report.rows() {
                let _ = writeln!(out, "{name},{accuracy:.4}");
            }
            print!("{out}");
        }
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn gen_corpus(args: GenCorpusArgs) -> Result<(), String> {
    let corpus = corpus::generate_default_corpus(args.seed);
    corpus::validate_default_shape(&corpus).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;
    let path = args.out.join("default.jsonl");
    corpus::save_corpus(&corpus, &path).map_err(|e| e.to_string())?;
    println!("wrote {} (seed {}, 20 prompts)", path.display(), args.seed);
    Ok(())
}

fn validate_rules(args: ValidateRulesArgs) -> Result<(), String> {
    let rules = RuleBase::load(&args.path).map_err(|e| e.to_string())?;
    warn_skipped(&rules);
    println!("OK: {} facts, totality satisfied", rules.facts().len());
    Ok(())
}

fn load_tagger(path: Option<&std::path::Path>) -> Result<TaggerConfig, String> {
    match path {
        Some(path) => TaggerConfig::load(path).map_err(|e| e.to_string()),
        None => Ok(TaggerConfig::default()),
    }
}

fn warn_skipped(rules: &RuleBase) {
    for head in rules.skipped_rules() {
        eprintln!("warning: skipped rule clause {head} (facts only are evaluated)");
    }
}

fn evaluation_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "metric                 value");
    let _ = writeln!(out, "---------------------  ------");
    let _ = writeln!(out, "coverage               {:.2}", report.coverage);
    let _ = writeln!(out, "tagging accuracy       {:.2}", report.tagging_accuracy);
    let _ = writeln!(out, "fairness delta         {:.2}", report.fairness_delta);
    let _ = writeln!(out, "readability (mean)     {:.1}", report.readability_mean);
    let _ = writeln!(out, "completeness (mean)    {:.2}", report.completeness_mean);
    let _ = writeln!(out, "prompts                {}", report.n_prompts);
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion (oracle x system)   low  medium  high");
    for oracle in UncertaintyTag::ALL {
        let row = report.confusion.counts[oracle.index()];
        let _ = writeln!(
            out,
            "{:<28}  {:>4}  {:>6}  {:>4}",
            oracle.as_str(),
            row[0],
            row[1],
            row[2]
        );
    }
    out
}

fn group_freq(report: &FairnessReport, group: &str, action: &str) -> f64 {
    report
        .per_group_action_freq
        .get(group)
        .and_then(|freqs| freqs.get(action))
        .copied()
        .unwrap_or(0.0)
}

fn masking_rows(comparison: &MaskingComparison) -> Vec<(String, f64, f64)> {
    let mut actions: Vec<String> = Vec::new();
    for report in [&comparison.original, &comparison.masked] {
        for freqs in report.per_group_action_freq.values() {
            for action in freqs.keys() {
                if !actions.contains(action) {
                    actions.push(action.clone());
                }
            }
        }
    }
    actions.sort();
    let mut rows = Vec::new();
    for action in actions {
        for group in ["male", "female"] {
            rows.push((
                format!("{action} freq ({group})"),
                group_freq(&comparison.original, group, &action),
                group_freq(&comparison.masked, group, &action),
            ));
        }
    }
    rows
}

fn masking_table(comparison: &MaskingComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<44}  original  masked", "");
    let _ = writeln!(
        out,
        "{:<44}  {:>8.2}  {:>6.2}",
        "fairness gap (delta)", comparison.original.delta, comparison.masked.delta
    );
    for (label, original, masked) in masking_rows(comparison) {
        let _ = writeln!(out, "{label:<44}  {original:>8.2}  {masked:>6.2}");
    }
    let _ = writeln!(
        out,
        "{:<44}  {:>8}  {:>6}",
        "excluded (unknown demographic)",
        comparison.original.excluded_unknown,
        comparison.masked.excluded_unknown
    );
    out
}

fn masking_csv(comparison: &MaskingComparison) -> String {
    let mut out = String::from("measure,original,masked\n");
    let _ = writeln!(
        out,
        "fairness_delta,{:.4},{:.4}",
        comparison.original.delta, comparison.masked.delta
    );
    for (label, original, masked) in masking_rows(comparison) {
        let _ = writeln!(out, "{},{original:.4},{masked:.4}", label.replace(' ', "_"));
    }
    out
}

fn ablation_table(report: &AblationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "setting           tagging accuracy");
    let _ = writeln!(out, "----------------  ----------------");
    for (name, accuracy) in report.rows() {
        let _ = writeln!(out, "{name:<16}  {accuracy:.2}");
    }
    out
}
