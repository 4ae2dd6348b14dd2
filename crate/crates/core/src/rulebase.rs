//! Declarative rule base: parsing, validation, and decision lookup.
//!
//! A rule file is a list of Prolog-style facts such as
//! `action(high, warn_and_refer).` and
//! `rationale(high, "Due to high uncertainty, ...").`. The engine does not
//! resolve arbitrary clauses; the only semantics it implements is the join of
//! `action/2` and `rationale/2` on an uncertainty tag, which [`RuleBase::decide`]
//! performs natively. Clauses with a `:-` body are recognised, recorded as
//! skipped, and ignored. Unknown predicates are stored but never consulted,
//! so a rule file can carry extra annotations without breaking the engine.
//!
//! Validation enforces totality and uniqueness: a loadable rule base has
//! exactly one `action` and one `rationale` fact for each of the three tags,
//! which is what makes `decide` infallible and gives the pipeline its
//! no-silent-failure coverage guarantee.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Qualitative confidence level attached to generated text.
///
/// The total order `Low < Medium < High` is what "more cautious" means
/// everywhere tie-breaking comes up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyTag {
    Low,
    Medium,
    High,
}

impl UncertaintyTag {
    pub const ALL: [UncertaintyTag; 3] =
        [UncertaintyTag::Low, UncertaintyTag::Medium, UncertaintyTag::High];

    /// Lowercase atom form, as it appears in rule files.
    pub fn as_str(self) -> &'static str {
        match self {
            UncertaintyTag::Low => "low",
            UncertaintyTag::Medium => "medium",
            UncertaintyTag::High => "high",
        }
    }

    /// Index in `ALL`; used for confusion-matrix axes.
    pub fn index(self) -> usize {
        match self {
            UncertaintyTag::Low => 0,
            UncertaintyTag::Medium => 1,
            UncertaintyTag::High => 2,
        }
    }

    /// The moral disposition this level activates.
    pub fn virtue(self) -> Virtue {
        match self {
            UncertaintyTag::High => Virtue::Precaution,
            UncertaintyTag::Medium => Virtue::Deference,
            UncertaintyTag::Low => Virtue::Responsibility,
        }
    }
}

impl fmt::Display for UncertaintyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UncertaintyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(UncertaintyTag::Low),
            "medium" => Ok(UncertaintyTag::Medium),
            "high" => Ok(UncertaintyTag::High),
            other => Err(format!("unknown uncertainty tag: {other:?}")),
        }
    }
}

/// Behavioural disposition paired with each uncertainty level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Virtue {
    Precaution,
    Deference,
    Responsibility,
}

impl fmt::Display for Virtue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Virtue::Precaution => "Precaution",
            Virtue::Deference => "Deference",
            Virtue::Responsibility => "Responsibility",
        };
        f.write_str(s)
    }
}

/// One argument of a fact: a lowercase atom or a quoted string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Atom(String),
    Str(String),
}

impl Term {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            Term::Str(_) => None,
        }
    }

    pub fn as_string(&self) -> Option<&str> {
        match self {
            Term::Str(s) => Some(s),
            Term::Atom(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => f.write_str(a),
            Term::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        other => write!(f, "{other}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// A ground fact `predicate(arg, ...)` with arity >= 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

/// Result of resolving a tag against a validated rule base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub tag: UncertaintyTag,
    pub action: String,
    pub rationale: String,
    pub ruleset_name: String,
}

impl Decision {
    /// The virtue corresponding to the decided tag; shown in verbose output.
    pub fn virtue(&self) -> Virtue {
        self.tag.virtue()
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    /// Totality or uniqueness violation; every problem is listed.
    #[error("rule base validation failed: {}", problems.join("; "))]
    Validation { problems: Vec<String> },
    #[error("cannot read rule file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Immutable, validated store of facts plus a record of skipped rule clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleBase {
    name: String,
    source_path: Option<PathBuf>,
    facts: Vec<Fact>,
    skipped_rules: Vec<String>,
}

impl RuleBase {
    /// Read, parse, and validate a rule file. The rule set name is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<RuleBase, RuleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "rules".to_string());
        let mut rb = parse_rule_file_named(&text, &name)?;
        rb.source_path = Some(path.to_path_buf());
        Ok(rb)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    /// Heads of `:-` clauses that were recognised and skipped during parsing.
    pub fn skipped_rules(&self) -> &[String] {
        &self.skipped_rules
    }

    /// Resolve the action and rationale for a tag.
    ///
    /// Total by construction: validation guarantees exactly one matching
    /// `action/2` and `rationale/2` fact per tag, so this never fails and the
    /// pipeline can rely on every prompt receiving a decision.
    pub fn decide(&self, tag: UncertaintyTag) -> Decision {
        let action = self
            .binary_fact("action", tag)
            .and_then(Term::as_atom)
            .expect("validated rule base has a unique action atom per tag");
        let rationale = self
            .binary_fact("rationale", tag)
            .and_then(Term::as_string)
            .expect("validated rule base has a unique rationale string per tag");
        Decision {
            tag,
            action: action.to_string(),
            rationale: rationale.to_string(),
            ruleset_name: self.name.clone(),
        }
    }

    /// Second argument of the unique `predicate(tag, _)` fact, if present.
    fn binary_fact(&self, predicate: &str, tag: UncertaintyTag) -> Option<&Term> {
        self.facts
            .iter()
            .find(|f| {
                f.predicate == predicate
                    && f.args.len() == 2
                    && f.args[0].as_atom() == Some(tag.as_str())
            })
            .map(|f| &f.args[1])
    }

    /// Render the fact store back into the rule-file grammar.
    ///
    /// Skipped rule clauses are not reproduced; round-tripping covers facts.
    pub fn to_rule_text(&self) -> String {
        let mut out = String::new();
        for fact in &self.facts {
            out.push_str(&fact.to_string());
            out.push_str(".\n");
        }
        out
    }
}

/// Parse and validate rule-file text. The resulting rule set is named `inline`.
pub fn parse_rule_file(text: &str) -> Result<RuleBase, RuleError> {
    parse_rule_file_named(text, "inline")
}

/// Parse and validate rule-file text under an explicit rule set name.
pub fn parse_rule_file_named(text: &str, name: &str) -> Result<RuleBase, RuleError> {
    let parsed = Parser::new(text).parse_all()?;

    // Set semantics: exact duplicate facts collapse; first occurrence wins.
    let mut seen = HashSet::new();
    let mut facts = Vec::new();
    for fact in parsed.facts {
        if seen.insert(fact.clone()) {
            facts.push(fact);
        }
    }

    let problems = validate_totality(&facts);
    if !problems.is_empty() {
        return Err(RuleError::Validation { problems });
    }

    Ok(RuleBase {
        name: name.to_string(),
        source_path: None,
        facts,
        skipped_rules: parsed.skipped_rules,
    })
}

/// Check the totality/uniqueness invariant over `action/2` and `rationale/2`.
fn validate_totality(facts: &[Fact]) -> Vec<String> {
    let mut problems = Vec::new();
    for predicate in ["action", "rationale"] {
        for tag in UncertaintyTag::ALL {
            let matches: Vec<&Fact> = facts
                .iter()
                .filter(|f| {
                    f.predicate == predicate
                        && f.args.len() == 2
                        && f.args[0].as_atom() == Some(tag.as_str())
                })
                .collect();
            match matches.len() {
                0 => problems.push(format!("missing {predicate}({tag}, _)")),
                1 => {
                    let arg = &matches[0].args[1];
                    let ok = match predicate {
                        "action" => matches!(arg, Term::Atom(_)),
                        _ => matches!(arg, Term::Str(_)),
                    };
                    if !ok {
                        let wanted = if predicate == "action" { "an atom" } else { "a quoted string" };
                        problems.push(format!(
                            "{predicate}({tag}, _) second argument must be {wanted}"
                        ));
                    }
                }
                n => problems.push(format!("duplicate {predicate}({tag}, _): {n} facts")),
            }
        }
    }
    problems
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Variable(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Turnstile,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier {s:?}"),
            Token::Variable(s) => format!("variable {s:?}"),
            Token::Str(_) => "string".to_string(),
            Token::LParen => "'('".to_string(),
            Token::RParen => "')'".to_string(),
            Token::LBracket => "'['".to_string(),
            Token::RBracket => "']'".to_string(),
            Token::Comma => "','".to_string(),
            Token::Dot => "'.'".to_string(),
            Token::Turnstile => "':-'".to_string(),
        }
    }
}

struct ParsedFile {
    facts: Vec<Fact>,
    skipped_rules: Vec<String>,
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
    /// Position of the most recently lexed token.
    token_line: usize,
    token_column: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
            token_line: 1,
            token_column: 1,
        }
    }

    fn error(&self, message: impl Into<String>) -> RuleError {
        RuleError::Parse {
            line: self.token_line,
            column: self.token_column,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, RuleError> {
        self.skip_trivia();
        self.token_line = self.line;
        self.token_column = self.column;
        let c = match self.chars.peek() {
            Some(&c) => c,
            None => return Ok(None),
        };
        let token = match c {
            '(' => {
                self.bump();
                Token::LParen
            }
            ')' => {
                self.bump();
                Token::RParen
            }
            '[' => {
                self.bump();
                Token::LBracket
            }
            ']' => {
                self.bump();
                Token::RBracket
            }
            ',' => {
                self.bump();
                Token::Comma
            }
            '.' => {
                self.bump();
                Token::Dot
            }
            ':' => {
                self.bump();
                match self.chars.peek() {
                    Some('-') => {
                        self.bump();
                        Token::Turnstile
                    }
                    _ => return Err(self.error("expected '-' after ':'")),
                }
            }
            '"' => {
                self.bump();
                let mut value = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('"') => value.push('"'),
                            Some('\\') => value.push('\\'),
                            Some(other) => {
                                return Err(self.error(format!(
                                    "unsupported escape '\\{other}' in string"
                                )))
                            }
                            None => return Err(self.error("unterminated string")),
                        },
                        Some(other) => value.push(other),
                        None => return Err(self.error("unterminated string")),
                    }
                }
                Token::Str(value)
            }
            c if c.is_ascii_lowercase() => {
                let mut ident = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Token::Ident(ident)
            }
            c if c.is_ascii_uppercase() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Token::Variable(ident)
            }
            other => return Err(self.error(format!("unexpected character {other:?}"))),
        };
        Ok(Some(token))
    }

    fn expect(&mut self, want: &Token) -> Result<(), RuleError> {
        match self.next_token()? {
            Some(ref t) if t == want => Ok(()),
            Some(t) => Err(self.error(format!("expected {}, found {}", want.describe(), t.describe()))),
            None => Err(self.error(format!("expected {}, found end of input", want.describe()))),
        }
    }

    fn parse_all(mut self) -> Result<ParsedFile, RuleError> {
        let mut facts = Vec::new();
        let mut skipped_rules = Vec::new();
        while let Some(token) = self.next_token()? {
            let predicate = match token {
                Token::Ident(name) => name,
                other => {
                    return Err(self.error(format!(
                        "expected a predicate identifier, found {}",
                        other.describe()
                    )))
                }
            };
            let (args, has_variable) = self.parse_arg_list()?;
            match self.next_token()? {
                Some(Token::Dot) => {
                    if let Some(var) = has_variable {
                        return Err(self.error(format!(
                            "variable {var:?} is not allowed in a fact"
                        )));
                    }
                    facts.push(Fact { predicate, args });
                }
                Some(Token::Turnstile) => {
                    // Clause bodies are outside the engine's semantics; skip
                    // to the terminating dot and note what was dropped.
                    self.skip_rule_body()?;
                    skipped_rules.push(format!("{predicate}/{}", args.len()));
                }
                Some(t) => {
                    return Err(self.error(format!(
                        "expected '.' or ':-' after clause head, found {}",
                        t.describe()
                    )))
                }
                None => return Err(self.error("expected '.' before end of input")),
            }
        }
        Ok(ParsedFile { facts, skipped_rules })
    }

    /// Parse `( term {, term} )`. Variables are tolerated here so that a rule
    /// head like `respond(Tag)` lexes cleanly; the caller rejects them for
    /// facts. Returns the args (variables encoded as atoms for arity only)
    /// and the first variable name seen, if any.
    fn parse_arg_list(&mut self) -> Result<(Vec<Term>, Option<String>), RuleError> {
        self.expect(&Token::LParen)?;
        let mut args = Vec::new();
        let mut first_variable = None;
        loop {
            match self.next_token()? {
                Some(Token::Ident(a)) => args.push(Term::Atom(a)),
                Some(Token::Str(s)) => args.push(Term::Str(s)),
                Some(Token::Variable(v)) => {
                    if first_variable.is_none() {
                        first_variable = Some(v.clone());
                    }
                    args.push(Term::Atom(v));
                }
                Some(t) => return Err(self.error(format!("expected a term, found {}", t.describe()))),
                None => return Err(self.error("expected a term, found end of input")),
            }
            match self.next_token()? {
                Some(Token::Comma) => continue,
                Some(Token::RParen) => break,
                Some(t) => {
                    return Err(self.error(format!("expected ',' or ')', found {}", t.describe())))
                }
                None => return Err(self.error("expected ')', found end of input")),
            }
        }
        Ok((args, first_variable))
    }

    /// Consume a rule body up to its terminating dot. Bodies may contain any
    /// token the lexer knows (goals, variables, strings, even list terms), so
    /// no structure is imposed beyond finding the clause end.
    fn skip_rule_body(&mut self) -> Result<(), RuleError> {
        loop {
            match self.next_token()? {
                Some(Token::Dot) => return Ok(()),
                Some(_) => continue,
                None => return Err(self.error("rule body not terminated by '.'")),
            }
        }
    }
}
