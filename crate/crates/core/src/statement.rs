//! Corpus records shared by every pipeline stage, plus the normalization
//! rules that keep formal statements in a canonical `... := by sorry` shape.

use serde::{Deserialize, Serialize};

use crate::hash;
use crate::lean::lexer::{self, TokenKind};
use crate::lean::{CompileReport, ParsedTheorem};

/// Name forced onto every generated or augmented statement.
pub const THEOREM_NAME: &str = "tm_name";
pub const TERMINATOR: &str = ":= by sorry";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatementError {
    #[error("statement does not begin with `theorem`")]
    NotATheorem,
    #[error("cannot tokenize statement: {0}")]
    Lex(String),
    #[error("invalid record: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
    pub topic: String,
    pub domain: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlStatus {
    Pending,
    Accepted,
    Carryover,
    Rejected,
}

impl NlStatus {
    /// Allowed lifecycle moves within a round.
    pub fn can_become(self, next: NlStatus) -> bool {
        self == next || (self == NlStatus::Pending && next != NlStatus::Pending)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlStatement {
    pub id: String,
    pub text: String,
    /// Ids of the two distinct concepts the statement was generated from.
    pub concepts: [String; 2],
    pub round_created: u32,
    pub status: NlStatus,
}

impl NlStatement {
    /// Builds a pending statement with a content-addressed id.
    pub fn new(text: &str, concepts: [String; 2], round: u32) -> Result<Self, StatementError> {
        let text = normalize_nl(text);
        if text.is_empty() {
            return Err(StatementError::Invariant("empty NL text".into()));
        }
        if concepts[0] == concepts[1] {
            return Err(StatementError::Invariant(
                "NL statement needs two distinct concepts".into(),
            ));
        }
        if round == 0 {
            return Err(StatementError::Invariant("rounds start at 1".into()));
        }
        let id = nl_id(&text, &concepts, round, 0);
        Ok(Self {
            id,
            text,
            concepts,
            round_created: round,
            status: NlStatus::Pending,
        })
    }

    pub fn with_status(mut self, status: NlStatus) -> Self {
        self.status = status;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Student,
    TeacherRevised,
    /// Reconstructed from a proof state during augmentation.
    Augmentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlStatement {
    pub id: String,
    pub nl_id: String,
    pub code: String,
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<ParsedTheorem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileReport>,
    /// The failed report that triggered a teacher revision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_compile: Option<CompileReport>,
}

impl FlStatement {
    pub fn new(nl_id: &str, code: &str, generator: Generator, round: u32) -> Self {
        let id = hash::short_id(
            "fl",
            &[
                nl_id.as_bytes(),
                code.as_bytes(),
                generator_tag(generator).as_bytes(),
                &round.to_le_bytes(),
            ],
        );
        Self {
            id,
            nl_id: nl_id.to_string(),
            code: code.to_string(),
            generator,
            parsed: None,
            compile: None,
            prior_compile: None,
        }
    }

    pub fn compiled(&self) -> bool {
        self.compile.as_ref().is_some_and(|c| c.success)
    }

    pub fn check(&self) -> Result<(), StatementError> {
        let trimmed = self.code.trim();
        if !trimmed.starts_with("theorem") {
            return Err(StatementError::NotATheorem);
        }
        if !trimmed.ends_with(TERMINATOR) {
            return Err(StatementError::Invariant(format!(
                "FL code must end with `{TERMINATOR}`"
            )));
        }
        if self.generator == Generator::TeacherRevised && !self.prior_compile.as_ref().is_some_and(|c| !c.success) {
            return Err(StatementError::Invariant(
                "teacher revision without a failed compile".into(),
            ));
        }
        Ok(())
    }
}

fn generator_tag(g: Generator) -> &'static str {
    match g {
        Generator::Student => "student",
        Generator::TeacherRevised => "teacher_revised",
        Generator::Augmentation => "augmentation",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Synthetic,
    ProofAug,
    ContraAug,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentRating {
    Good,
    Average,
    Poor,
}

impl AlignmentRating {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Some(Self::Good),
            "average" => Some(Self::Average),
            "poor" => Some(Self::Poor),
            _ => None,
        }
    }
}

/// Good and average pairs enter the corpus; poor ones keep only their NL.
pub fn accept_rating(rating: AlignmentRating) -> bool {
    matches!(rating, AlignmentRating::Good | AlignmentRating::Average)
}

/// Back-reference from an augmented pair to the statement it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub source_fl_id: String,
    pub source_nl_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelStatement {
    pub nl: NlStatement,
    pub fl: FlStatement,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<AlignmentRating>,
    pub round: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<Lineage>,
}

impl ParallelStatement {
    pub fn new(
        nl: NlStatement,
        fl: FlStatement,
        origin: Origin,
        rating: Option<AlignmentRating>,
        round: u32,
        lineage: Option<Lineage>,
    ) -> Result<Self, StatementError> {
        let ps = Self {
            nl,
            fl,
            origin,
            rating,
            round,
            lineage,
        };
        ps.check()?;
        Ok(ps)
    }

    pub fn check(&self) -> Result<(), StatementError> {
        if self.fl.nl_id != self.nl.id {
            return Err(StatementError::Invariant(format!(
                "FL {} points at NL {}, pair holds {}",
                self.fl.id, self.fl.nl_id, self.nl.id
            )));
        }
        match self.origin {
            Origin::Synthetic => match self.rating {
                Some(r) if accept_rating(r) => {}
                Some(_) => return Err(StatementError::Invariant("poor-rated pairs are never stored".into())),
                None => {
                    return Err(StatementError::Invariant(
                        "synthetic pairs carry an alignment rating".into(),
                    ))
                }
            },
            Origin::ProofAug | Origin::ContraAug => {
                if !self.fl.compiled() {
                    return Err(StatementError::Invariant("augmented statements must compile".into()));
                }
            }
        }
        self.fl.check()
    }
}

/// Content-addressed NL id. `salt` separates genuine duplicates inside one
/// batch.
pub fn nl_id(text: &str, concepts: &[String; 2], round: u32, salt: u32) -> String {
    let mut pair = [concepts[0].as_str(), concepts[1].as_str()];
    pair.sort_unstable();
    hash::short_id(
        "nl",
        &[
            text.as_bytes(),
            pair[0].as_bytes(),
            pair[1].as_bytes(),
            &round.to_le_bytes(),
            &salt.to_le_bytes(),
        ],
    )
}

/// Whitespace hygiene for NL text: LF line endings, trimmed lines, a leading
/// `Theorem:` label removed.
pub fn normalize_nl(text: &str) -> String {
    let text = text.replace("\r\n", "\n");
    let joined = text.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
    let trimmed = joined.trim();
    let stripped = trimmed
        .strip_prefix("Theorem:")
        .or_else(|| trimmed.strip_prefix("theorem:"))
        .unwrap_or(trimmed);
    stripped.trim().to_string()
}

/// Canonical form of a formal statement.
///
/// Line endings become LF, trailing whitespace is removed, and everything from
/// the first top-level `:=` onwards is replaced by a single `:= by sorry`
/// (appended when missing). A statement that already ends in exactly one
/// top-level `:= by sorry` keeps its layout.
pub fn normalize_code(code: &str) -> Result<String, StatementError> {
    let code = code.replace("\r\n", "\n").replace('\r', "\n");
    let code = code.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
    let code = code.trim();
    let tokens = lexer::tokenize(code).map_err(|e| StatementError::Lex(e.to_string()))?;
    if !tokens.first().is_some_and(|t| t.is_ident("theorem")) {
        return Err(StatementError::NotATheorem);
    }
    let depths = lexer::depths(&tokens);
    let assign = tokens.iter().zip(&depths).position(|(t, d)| *d == 0 && t.is_sym(":="));
    let Some(assign) = assign else {
        return Ok(format!("{code} {TERMINATOR}"));
    };
    let tail = &tokens[assign..];
    let already_sorry = tail.len() == 3 && tail[1].is_ident("by") && tail[2].is_ident("sorry");
    if already_sorry && tail[2].end == code.len() {
        return Ok(code.to_string());
    }
    let head = code[..tokens[assign].start].trim_end();
    Ok(format!("{head} {TERMINATOR}"))
}

/// Renames the declared theorem, leaving everything else untouched.
pub fn force_theorem_name(code: &str, name: &str) -> Result<String, StatementError> {
    let tokens = lexer::tokenize(code).map_err(|e| StatementError::Lex(e.to_string()))?;
    let mut it = tokens.iter();
    match it.next() {
        Some(t) if t.is_ident("theorem") => {}
        _ => return Err(StatementError::NotATheorem),
    }
    match it.next() {
        Some(t) if t.kind == TokenKind::Ident => Ok(format!("{}{}{}", &code[..t.start], name, &code[t.end..])),
        _ => Err(StatementError::Invariant("theorem has no name".into())),
    }
}

/// Collapses all whitespace runs (and comments) to single spaces, leaving
/// string literals intact.
pub fn single_line(code: &str) -> String {
    let Ok(tokens) = lexer::tokenize(code) else {
        return code.split_whitespace().collect::<Vec<_>>().join(" ");
    };
    let mut out = String::with_capacity(code.len());
    let mut prev_end: Option<usize> = None;
    for tok in &tokens {
        if let Some(end) = prev_end {
            if end < tok.start {
                out.push(' ');
            }
        }
        out.push_str(tok.text);
        prev_end = Some(tok.end);
    }
    out
}
