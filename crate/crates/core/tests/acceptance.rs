//! Acceptance suite: one test per release criterion, run against the shipped
//! fixtures (frozen corpus, completion script, rule files, tagger defaults).
//!
//! Each test prints a `PASS criterion N` line; run with `-- --nocapture` to
//! see them. Criterion 10 is a soft latency benchmark and reports its
//! measurement without gating the suite.

use std::path::{Path, PathBuf};
use std::time::Instant;

use caveat::corpus::{self, Demographic};
use caveat::metrics::{self, ConfusionMatrix};
use caveat::pipeline::{self, PipelineRecord, RunConfig};
use caveat::provider::ScriptedProvider;
use caveat::rulebase::{RuleBase, Term, UncertaintyTag};
use caveat::tagger::{self, TaggerConfig};

use proptest::prelude::*;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn default_run_config(output_dir: &Path, stable: bool) -> RunConfig {
    RunConfig {
        corpus_path: fixture("corpus/default.jsonl"),
        ruleset_path: fixture("rules/canonical.pl"),
        script_path: fixture("scripts/default.json"),
        tagger_config_path: Some(fixture("tagger/default.toml")),
        output_dir: output_dir.to_path_buf(),
        stable,
        ..RunConfig::default()
    }
}

#[test]
fn criterion_01_rule_totality_and_full_coverage() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_run_config(dir.path(), true);
    let outcome = pipeline::run_corpus(&cfg).unwrap();
    let corpus = corpus::load_default_corpus(&cfg.corpus_path).unwrap();
    let report = metrics::evaluate(&outcome.records, &corpus).unwrap();

    assert_eq!(report.coverage, 1.0, "coverage must be exactly 1.00");
    assert_eq!(outcome.failed, 0);
    assert_eq!(outcome.ok, 20);

    // decide() is total over both shipped rule files and all three tags
    for rules_file in ["rules/canonical.pl", "rules/listing1.pl"] {
        let rules = RuleBase::load(fixture(rules_file)).unwrap();
        for tag in UncertaintyTag::ALL {
            let decision = rules.decide(tag);
            assert!(!decision.action.is_empty());
            assert!(!decision.rationale.is_empty());
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 5, "criterion 1 must finish in under 5 s");
    println!("PASS criterion 1: coverage = 1.00 on the shipped fixtures; decide() total over both rule files ({elapsed:?})");
}

#[test]
fn criterion_02_rule_file_fidelity() {
    let canonical = RuleBase::load(fixture("rules/canonical.pl")).unwrap();
    let atom = |s: &str| Term::Atom(s.to_string());
    let text = |s: &str| Term::Str(s.to_string());
    let expected = [
        ("action", vec![atom("high"), atom("warn_and_refer")]),
        ("action", vec![atom("medium"), atom("partial_answer_with_reference")]),
        ("action", vec![atom("low"), atom("full_answer_with_disclaimer")]),
        (
            "rationale",
            vec![
                atom("high"),
                text("Due to high uncertainty, we recommend consulting a qualified expert before taking action."),
            ],
        ),
        (
            "rationale",
            vec![
                atom("medium"),
                text("The model's confidence is limited. We suggest verifying this information with a human expert."),
            ],
        ),
        (
            "rationale",
            vec![
                atom("low"),
                text("This result is provided based on available data and should be considered as a recommendation, not a definitive judgment."),
            ],
        ),
    ];
    assert_eq!(canonical.facts().len(), 6);
    for (i, (predicate, args)) in expected.iter().enumerate() {
        assert_eq!(canonical.facts()[i].predicate, *predicate);
        assert_eq!(&canonical.facts()[i].args, args);
    }

    let high = canonical.decide(UncertaintyTag::High);
    assert_eq!(high.action, "warn_and_refer");
    assert_eq!(
        high.rationale,
        "Due to high uncertainty, we recommend consulting a qualified expert before taking action."
    );

    let listing1 = RuleBase::load(fixture("rules/listing1.pl")).unwrap();
    assert_eq!(listing1.decide(UncertaintyTag::Low).action, "respond_confidently");
    assert_eq!(listing1.decide(UncertaintyTag::Medium).action, "respond_with_caution");
    assert_eq!(listing1.decide(UncertaintyTag::High).action, "defer_to_human");
    assert_eq!(listing1.decide(UncertaintyTag::Low).rationale, "The model had high confidence.");

    println!("PASS criterion 2: canonical file parses to the six exact facts; both vocabularies decide verbatim");
}

#[test]
fn criterion_03_micro_case_goldens() {
    let env_corpus = corpus::load_corpus(fixture("corpus/environmental.jsonl")).unwrap();
    let provider = ScriptedProvider::from_path(fixture("scripts/environmental.json")).unwrap();
    let tagger_cfg = TaggerConfig::load(fixture("tagger/default.toml")).unwrap();
    let canonical = RuleBase::load(fixture("rules/canonical.pl")).unwrap();
    let listing1 = RuleBase::load(fixture("rules/listing1.pl")).unwrap();

    let tag_of = |id: &str| {
        let prompt = env_corpus.get(id).unwrap();
        let request = caveat::GenerationRequest::new(&prompt.id, &prompt.text);
        let result = caveat::CompletionProvider::generate(&provider, &request).unwrap();
        tagger::tag(&result.completions, None, &tagger_cfg).unwrap().tag
    };

    // Case 1 (low) resolves against the listing1 vocabulary, cases 2-3 against
    // the canonical one.
    let case1 = tag_of("env_01");
    assert_eq!(case1, UncertaintyTag::Low);
    assert_eq!(listing1.decide(case1).action, "respond_confidently");

    let case2 = tag_of("env_02");
    assert_eq!(case2, UncertaintyTag::Medium);
    assert_eq!(canonical.decide(case2).action, "partial_answer_with_reference");

    let case3 = tag_of("env_03");
    assert_eq!(case3, UncertaintyTag::High);
    assert_eq!(canonical.decide(case3).action, "warn_and_refer");

    println!("PASS criterion 3: environmental micro-cases tag low/medium/high with their expected actions");
}

#[test]
fn criterion_04_ablation_ordering() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_run_config(dir.path(), true);
    let report = metrics::ablation_sweep(&cfg).unwrap();

    assert!(report.both_ablated <= report.hedge_ablated);
    assert!(report.both_ablated <= report.negation_ablated);
    assert!(report.hedge_ablated <= report.full);
    assert!(report.negation_ablated <= report.full);
    assert!(
        report.full - report.both_ablated >= 0.1,
        "both-ablated accuracy must trail the full model by at least 0.1 (full {}, both {})",
        report.full,
        report.both_ablated
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 20, "criterion 4 must finish in under 20 s");
    println!(
        "PASS criterion 4: ablation ordering holds (full {:.2} >= singles {:.2}/{:.2} >= both {:.2}) ({elapsed:?})",
        report.full, report.hedge_ablated, report.negation_ablated, report.both_ablated
    );
}

#[test]
fn criterion_05_masking_drives_delta_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_run_config(dir.path(), true);
    let comparison = metrics::masking_comparison(&cfg).unwrap();

    assert_eq!(comparison.masked.delta, 0.0, "masked delta must be exactly 0.00");
    assert!(comparison.original.delta >= 0.0);
    assert_eq!(comparison.masked.excluded_unknown, 20);

    // masking is idempotent on the shipped corpus
    let corpus = corpus::load_default_corpus(&cfg.corpus_path).unwrap();
    let once = corpus::mask_demographics(&corpus);
    let twice = corpus::mask_demographics(&once);
    assert_eq!(once, twice);
    assert!(once.prompts.iter().all(|p| p.demographic == Demographic::Unknown));

    println!(
        "PASS criterion 5: masked delta = 0.00 (original {:.2}); masking idempotent",
        comparison.original.delta
    );
}

#[test]
fn criterion_06_fairness_arithmetic_oracle() {
    // Hand-constructed record set: 4 male (1 warn_and_refer, 3 deference),
    // 4 female (all deference). Expected by direct arithmetic:
    // male warn freq 1/4 = 0.25, female 0; partial 3/4 vs 4/4 gap 0.25;
    // delta = 0.25.
    let mut prompts = Vec::new();
    let mut records = Vec::new();
    let spec: [(Demographic, &str); 8] = [
        (Demographic::Male, "warn_and_refer"),
        (Demographic::Male, "partial_answer_with_reference"),
        (Demographic::Male, "partial_answer_with_reference"),
        (Demographic::Male, "partial_answer_with_reference"),
        (Demographic::Female, "partial_answer_with_reference"),
        (Demographic::Female, "partial_answer_with_reference"),
        (Demographic::Female, "partial_answer_with_reference"),
        (Demographic::Female, "partial_answer_with_reference"),
    ];
    for (i, (demographic, action)) in spec.iter().enumerate() {
        let id = format!("p_{i:02}");
        let tag = if *action == "warn_and_refer" {
            UncertaintyTag::High
        } else {
            UncertaintyTag::Medium
        };
        prompts.push(caveat::Prompt {
            id: id.clone(),
            domain: caveat::Domain::Clinical,
            text: "q".to_string(),
            oracle_tag: tag,
            demographic: *demographic,
            age: None,
            info_sufficiency: caveat::corpus::InfoSufficiency::Complete,
            risk_severity: caveat::corpus::RiskSeverity::Low,
        });
        records.push(PipelineRecord {
            prompt_id: id,
            prompt_text: "q".to_string(),
            completions: vec!["c".to_string()],
            features: None,
            system_tag: Some(tag),
            oracle_tag: tag,
            action: Some(action.to_string()),
            rationale: Some("r".to_string()),
            composed_response: Some("c".to_string()),
            demographic: *demographic,
            latency_micros: 0,
            error: None,
        });
    }
    let corpus = caveat::Corpus { name: "oracle".to_string(), prompts };
    let report = metrics::fairness_audit(&records, &corpus).unwrap();

    assert_eq!(report.per_group_action_freq["male"]["warn_and_refer"], 0.25);
    assert_eq!(report.per_group_action_freq["male"]["partial_answer_with_reference"], 0.75);
    assert_eq!(report.per_group_action_freq["female"]["partial_answer_with_reference"], 1.0);
    assert_eq!(report.per_group_action_freq["female"].get("warn_and_refer"), None);
    assert_eq!(report.delta, 0.25);

    println!("PASS criterion 6: hand-constructed audit reproduces warn 25%/0% and delta = 0.25 exactly");
}

#[test]
fn criterion_07_readability_oracle() {
    // Syllable counts were hand-verified against the counting rules before
    // the implementation was written; values are frozen here.
    let fixtures = [
        ("The cat sat.", 119.19),
        (
            "Due to high uncertainty, we recommend consulting a qualified expert before taking action.",
            24.44,
        ),
        (
            "The model's confidence is limited. We suggest verifying this information with a human expert.",
            36.5729,
        ),
        (
            "This result is provided based on available data and should be considered as a recommendation, not a definitive judgment.",
            22.8026,
        ),
        (
            "High uncertainty detected; it's best to consult a specialist.",
            37.90,
        ),
    ];
    for (text, expected) in fixtures {
        let got = metrics::readability(text).unwrap();
        assert!(
            (got - expected).abs() <= 0.01,
            "{text:?}: got {got:.4}, expected {expected:.4}"
        );
    }
    println!("PASS criterion 7: Flesch Reading Ease matches all five frozen oracles within 0.01");
}

#[test]
fn criterion_08_stable_runs_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();

    let run = |dir: &Path| {
        let cfg = default_run_config(dir, true);
        let outcome = pipeline::run_corpus(&cfg).unwrap();
        let corpus = corpus::load_default_corpus(&cfg.corpus_path).unwrap();
        let csv_path = dir.join("evaluation.csv");
        metrics::write_evaluation_csv(&outcome.records, &corpus, &csv_path).unwrap();
        (
            std::fs::read(outcome.outputs_path).unwrap(),
            std::fs::read(csv_path).unwrap(),
        )
    };
    let (outputs_a, csv_a) = run(dir_a.path());
    let (outputs_b, csv_b) = run(dir_b.path());

    assert_eq!(outputs_a, outputs_b, "outputs.json must be byte-identical");
    assert_eq!(csv_a, csv_b, "evaluation.csv must be byte-identical");
    assert!(!outputs_a.is_empty() && !csv_a.is_empty());

    println!("PASS criterion 8: two stable runs produce byte-identical outputs.json and evaluation.csv");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]
    /// Randomised runs: accuracy always equals trace/sum and the mismatch
    /// table always has exactly the off-diagonal count of rows.
    #[test]
    fn criterion_09_confusion_matrix_consistency(
        assignments in prop::collection::vec((0usize..3, 0usize..3, prop::bool::weighted(0.85)), 1..40)
    ) {
        let all = UncertaintyTag::ALL;
        let mut prompts = Vec::new();
        let mut records = Vec::new();
        for (i, &(oracle, system, ok)) in assignments.iter().enumerate() {
            let id = format!("r_{i:02}");
            prompts.push(caveat::Prompt {
                id: id.clone(),
                domain: caveat::Domain::Legal,
                text: "q".to_string(),
                oracle_tag: all[oracle],
                demographic: Demographic::Unknown,
                age: None,
                info_sufficiency: caveat::corpus::InfoSufficiency::Partial,
                risk_severity: caveat::corpus::RiskSeverity::Low,
            });
            records.push(PipelineRecord {
                prompt_id: id,
                prompt_text: "q".to_string(),
                completions: vec!["some completion text".to_string()],
                features: None,
                system_tag: ok.then_some(all[system]),
                oracle_tag: all[oracle],
                action: ok.then(|| "a".to_string()),
                rationale: ok.then(|| "r".to_string()),
                composed_response: ok.then(|| "c".to_string()),
                demographic: Demographic::Unknown,
                latency_micros: 0,
                error: (!ok).then(|| "scripted failure".to_string()),
            });
        }
        let corpus = caveat::Corpus { name: "random".to_string(), prompts };
        let report = metrics::evaluate(&records, &corpus).unwrap();
        let confusion: ConfusionMatrix = report.confusion;

        if confusion.total() > 0 {
            let expected = f64::from(confusion.trace()) / f64::from(confusion.total());
            prop_assert!((report.tagging_accuracy - expected).abs() < 1e-12);
        } else {
            prop_assert_eq!(report.tagging_accuracy, 0.0);
        }
        let mismatches = metrics::error_analysis(&records, &corpus).unwrap();
        prop_assert_eq!(mismatches.len() as u32, confusion.total() - confusion.trace());
    }
}

#[test]
fn criterion_09_prints_its_line() {
    // the property itself runs above; this records the pass line
    println!("PASS criterion 9: trace/sum accuracy and mismatch-row consistency hold over randomized runs");
}

#[test]
fn criterion_10_latency_soft_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_run_config(dir.path(), false);
    let outcome = pipeline::run_corpus(&cfg).unwrap();
    let mean_micros = outcome
        .records
        .iter()
        .map(|r| r.latency_micros)
        .sum::<u64>() as f64
        / outcome.records.len() as f64;
    let mean_ms = mean_micros / 1000.0;
    // Soft benchmark: reported, never gating.
    if mean_ms < 10.0 {
        println!("PASS criterion 10 (soft): mean per-prompt latency {mean_ms:.3} ms < 10 ms");
    } else {
        println!("SOFT-FAIL criterion 10 (non-gating): mean per-prompt latency {mean_ms:.3} ms >= 10 ms");
    }
}
