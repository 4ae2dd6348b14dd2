//! Synthetic oracle-labelled prompt corpus: JSONL I/O, deterministic
//! generation, shape validation, and demographic masking.
//!
//! The default corpus is twenty prompts, ten clinical and ten legal, each
//! domain split 3 low / 4 medium / 3 high by oracle tag. Prompts carry a
//! demographic attribute both as metadata and as an in-text phrase
//! (`male, 45` style) so that masking is observable end to end. The committed
//! default file is the generator's seed-0 output, reviewed and frozen; the
//! environmental micro-case fixture is a separate three-prompt file excluded
//! from the default metric sweep.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rulebase::UncertaintyTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Clinical,
    Legal,
    Environmental,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Clinical => "clinical",
            Domain::Legal => "legal",
            Domain::Environmental => "environmental",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Demographic {
    Male,
    Female,
    Unknown,
}

impl Demographic {
    pub fn as_str(self) -> &'static str {
        match self {
            Demographic::Male => "male",
            Demographic::Female => "female",
            Demographic::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoSufficiency {
    Complete,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskSeverity {
    Low,
    High,
}

/// One synthetic query with its design-time oracle label.
///
/// Field order is fixed; serialisation preserves it, which keeps the JSONL
/// files byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub domain: Domain,
    pub text: String,
    pub oracle_tag: UncertaintyTag,
    pub demographic: Demographic,
    pub age: Option<u8>,
    pub info_sufficiency: InfoSufficiency,
    pub risk_severity: RiskSeverity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub prompts: Vec<Prompt>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Prompt> {
        self.prompts.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus schema error at {path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corpus shape error: {0}")]
    Shape(String),
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Load a JSONL corpus. The corpus name is the file stem.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());

    let mut prompts = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let prompt: Prompt =
            serde_json::from_str(line).map_err(|e| CorpusError::Schema {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        if prompt.demographic == Demographic::Unknown && prompt.age.is_some() {
            return Err(CorpusError::Schema {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("prompt {}: age must be absent when demographic is unknown", prompt.id),
            });
        }
        if prompts.iter().any(|p: &Prompt| p.id == prompt.id) {
            return Err(CorpusError::Schema {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("duplicate prompt id {}", prompt.id),
            });
        }
        prompts.push(prompt);
    }
    Ok(Corpus { name, prompts })
}

/// Load a corpus that claims to be the default set, enforcing its shape.
pub fn load_default_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let corpus = load_corpus(path)?;
    validate_default_shape(&corpus)?;
    Ok(corpus)
}

/// Enforce the default-corpus shape: 20 prompts, 10 per domain, and a
/// 3 low / 4 medium / 3 high oracle split within each domain.
pub fn validate_default_shape(corpus: &Corpus) -> Result<(), CorpusError> {
    if corpus.len() != 20 {
        return Err(CorpusError::Shape(format!(
            "default corpus must have exactly 20 prompts, found {}",
            corpus.len()
        )));
    }
    for domain in [Domain::Clinical, Domain::Legal] {
        let in_domain: Vec<&Prompt> =
            corpus.prompts.iter().filter(|p| p.domain == domain).collect();
        if in_domain.len() != 10 {
            return Err(CorpusError::Shape(format!(
                "domain {domain:?} must have 10 prompts, found {}",
                in_domain.len()
            )));
        }
        let mut counts = [0usize; 3];
        for p in &in_domain {
            counts[p.oracle_tag.index()] += 1;
        }
        if counts != [3, 4, 3] {
            return Err(CorpusError::Shape(format!(
                "domain {domain:?} oracle split must be 3 low / 4 medium / 3 high, found {} / {} / {}",
                counts[0], counts[1], counts[2]
            )));
        }
    }
    Ok(())
}

/// Serialise a corpus as JSONL, one prompt per line.
pub fn corpus_to_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for prompt in &corpus.prompts {
        out.push_str(&serde_json::to_string(prompt).expect("prompt serialises"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    std::fs::write(path, corpus_to_jsonl(corpus)).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Replace demographic information with the `unknown` placeholder.
///
/// Every prompt's demographic becomes `unknown` with age cleared, and any
/// in-text `male, 45` / `female,70` phrase or bare `male` / `female` token is
/// rewritten to `unknown`. Oracle tags, ids, and domains are untouched.
/// Idempotent: masking a masked corpus is the identity.
pub fn mask_demographics(corpus: &Corpus) -> Corpus {
    let labelled = Regex::new(r"(?i)\b(male|female),\s*\d{1,3}\b").expect("static regex");
    let bare = Regex::new(r"(?i)\b(male|female)\b").expect("static regex");
    let name = if corpus.name.ends_with("_masked") {
        corpus.name.clone()
    } else {
        format!("{}_masked", corpus.name)
    };
    let prompts = corpus
        .prompts
        .iter()
        .map(|p| {
            let text = labelled.replace_all(&p.text, "unknown");
            let text = bare.replace_all(&text, "unknown");
            Prompt {
                id: p.id.clone(),
                domain: p.domain,
                text: text.into_owned(),
                oracle_tag: p.oracle_tag,
                demographic: Demographic::Unknown,
                age: None,
                info_sufficiency: p.info_sufficiency,
                risk_severity: p.risk_severity,
            }
        })
        .collect();
    Corpus { name, prompts }
}

// ---------------------------------------------------------------------------
// Default-corpus generator
// ---------------------------------------------------------------------------

struct Template {
    id: &'static str,
    domain: Domain,
    oracle: UncertaintyTag,
    demographic: Demographic,
    age_range: (u8, u8),
    info: InfoSufficiency,
    risk: RiskSeverity,
    /// `{demo}` is replaced by `male, 45` style text for known demographics.
    text: &'static str,
}

use Demographic::{Female, Male, Unknown};
use Domain::{Clinical, Legal};
use InfoSufficiency::{Complete, Partial};
use RiskSeverity::{High as RiskHigh, Low as RiskLow};
use UncertaintyTag::{High, Low, Medium};

/// One template per default-corpus slot. Low-tag prompt texts carry no cue
/// phrases, medium-tag texts carry hedges, high-tag texts carry negation or
/// impossibility cues; ordering fixes the id scheme.
const TEMPLATES: [Template; 20] = [
    Template {
        id: "med_01", domain: Clinical, oracle: Low, demographic: Female,
        age_range: (48, 74), info: Complete, risk: RiskLow,
        text: "A patient, {demo}, asks: what is the standard adult dosage of amoxicillin for a confirmed strep throat infection?",
    },
    Template {
        id: "med_02", domain: Clinical, oracle: Medium, demographic: Female,
        age_range: (30, 59), info: Partial, risk: RiskLow,
        text: "A patient, {demo}, asks whether a newly approved therapy could reduce relapse for her condition; trial data are still limited.",
    },
    Template {
        id: "med_03", domain: Clinical, oracle: Low, demographic: Male,
        age_range: (45, 69), info: Complete, risk: RiskLow,
        text: "A patient, {demo}, asks for the reference range interpretation of last week's routine cholesterol panel.",
    },
    Template {
        id: "med_04", domain: Clinical, oracle: High, demographic: Male,
        age_range: (55, 79), info: Partial, risk: RiskHigh,
        text: "A patient, {demo}, reports new chest pain and asks whether his current medication is the cause; records show insufficient evidence for any attribution.",
    },
    Template {
        id: "med_05", domain: Clinical, oracle: Medium, demographic: Female,
        age_range: (38, 66), info: Partial, risk: RiskLow,
        text: "A patient, {demo}, asks if her imaging results might change the treatment plan; the radiology summary is pending.",
    },
    Template {
        id: "med_06", domain: Clinical, oracle: Medium, demographic: Male,
        age_range: (50, 72), info: Partial, risk: RiskHigh,
        text: "A patient, {demo}, on a new anticoagulant asks how an interaction could affect outcomes over the next month.",
    },
    Template {
        id: "med_07", domain: Clinical, oracle: High, demographic: Unknown,
        age_range: (0, 0), info: Partial, risk: RiskHigh,
        text: "A caller asks whether an unverified home test proves an infection; no evidence from a laboratory is available.",
    },
    Template {
        id: "med_08", domain: Clinical, oracle: Medium, demographic: Female,
        age_range: (25, 49), info: Complete, risk: RiskLow,
        text: "A patient, {demo}, asks whether mild symptoms possibly indicate a seasonal viral cause.",
    },
    Template {
        id: "med_09", domain: Clinical, oracle: Low, demographic: Male,
        age_range: (35, 64), info: Complete, risk: RiskLow,
        text: "A patient, {demo}, asks what his latest blood pressure reading of 118 over 76 means.",
    },
    Template {
        id: "med_10", domain: Clinical, oracle: High, demographic: Unknown,
        age_range: (0, 0), info: Partial, risk: RiskHigh,
        text: "A clinic receives an anonymous query about sudden fainting spells; prior history cannot be confirmed from the chart fragments.",
    },
    Template {
        id: "legal_01", domain: Legal, oracle: Low, demographic: Male,
        age_range: (28, 57), info: Complete, risk: RiskLow,
        text: "A tenant, {demo}, asks how many days of written notice a landlord must give before ending a standard residential lease.",
    },
    Template {
        id: "legal_02", domain: Legal, oracle: Medium, demographic: Female,
        age_range: (33, 61), info: Partial, risk: RiskLow,
        text: "A client, {demo}, asks whether a disputed contract clause could be read in her favour; the governing precedent is uncertain.",
    },
    Template {
        id: "legal_03", domain: Legal, oracle: High, demographic: Male,
        age_range: (40, 68), info: Partial, risk: RiskHigh,
        text: "A defendant, {demo}, asks who bears fault in a multi-vehicle collision; witness affidavits conflict and offer insufficient evidence.",
    },
    Template {
        id: "legal_04", domain: Legal, oracle: Low, demographic: Female,
        age_range: (29, 55), info: Complete, risk: RiskLow,
        text: "A claimant, {demo}, asks for the statute of limitations on a consumer claim discovered this year.",
    },
    Template {
        id: "legal_05", domain: Legal, oracle: Medium, demographic: Female,
        age_range: (36, 63), info: Partial, risk: RiskLow,
        text: "A client, {demo}, asks if an appeal is likely to succeed after a mixed ruling in a neighbouring district.",
    },
    Template {
        id: "legal_06", domain: Legal, oracle: High, demographic: Unknown,
        age_range: (0, 0), info: Partial, risk: RiskHigh,
        text: "An anonymous query asks whether scanned records prove ownership; the originals cannot be confirmed as authentic.",
    },
    Template {
        id: "legal_07", domain: Legal, oracle: Medium, demographic: Female,
        age_range: (42, 70), info: Complete, risk: RiskLow,
        text: "A client, {demo}, asks roughly what settlement range comparable injury cases have produced.",
    },
    Template {
        id: "legal_08", domain: Legal, oracle: Medium, demographic: Male,
        age_range: (47, 73), info: Partial, risk: RiskHigh,
        text: "An executor, {demo}, asks whether a handwritten will could stand; key pages suggest later edits.",
    },
    Template {
        id: "legal_09", domain: Legal, oracle: Low, demographic: Male,
        age_range: (26, 52), info: Complete, risk: RiskLow,
        text: "A filer, {demo}, asks for the total filing fee for a small claims action in this jurisdiction.",
    },
    Template {
        id: "legal_10", domain: Legal, oracle: High, demographic: Unknown,
        age_range: (0, 0), info: Partial, risk: RiskHigh,
        text: "An unsigned letter asks whether a former employer is negligent; the enclosed filings offer insufficient evidence to establish anything.",
    },
];

/// Build the default corpus deterministically from a seed.
///
/// The template slots fix ids, domains, oracle tags, demographic balance
/// (four male, four female, two unknown per domain), and both sufficiency and
/// severity levels; the seed varies ages. The same seed always yields
/// byte-identical JSONL.
pub fn generate_default_corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prompts = TEMPLATES
        .iter()
        .map(|t| {
            let (age, text) = match t.demographic {
                Demographic::Unknown => (None, t.text.to_string()),
                demo => {
                    let age = rng.gen_range(t.age_range.0..=t.age_range.1);
                    let phrase = format!("{}, {}", demo.as_str(), age);
                    (Some(age), t.text.replace("{demo}", &phrase))
                }
            };
            Prompt {
                id: t.id.to_string(),
                domain: t.domain,
                text,
                oracle_tag: t.oracle,
                demographic: t.demographic,
                age,
                info_sufficiency: t.info,
                risk_severity: t.risk,
            }
        })
        .collect();
    let corpus = Corpus {
        name: "default".to_string(),
        prompts,
    };
    debug_assert!(validate_default_shape(&corpus).is_ok());
    corpus
}
