//! Syntactic decomposition of a theorem statement into name, binders and
//! conclusion, and the line-by-line layout used before compilation.

use super::lexer::{self, LexError, Token, TokenKind};
use super::{Binder, BinderKind, ParsedTheorem};
use crate::statement::{single_line, TERMINATOR};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("cannot tokenize: {0}")]
    Lex(#[from] LexError),
    #[error("unbalanced delimiters: {0}")]
    Unbalanced(String),
    #[error("expected a `theorem` declaration")]
    NotATheorem,
    #[error("`{0}` blocks are not supported in standalone statements")]
    UnsupportedContext(String),
    #[error("theorem has no name")]
    MissingName,
    #[error("missing `:` before the conclusion")]
    MissingColon,
    #[error("empty conclusion")]
    MissingConclusion,
    #[error("malformed binder `{0}`")]
    MalformedBinder(String),
}

const CONTEXT_KEYWORDS: &[&str] = &[
    "variable",
    "variables",
    "namespace",
    "section",
    "open",
    "universe",
    "universes",
];

/// Relations and connectives whose presence at the top level of a binder
/// type marks it as a proposition.
const PROP_TOKENS: &[&str] = &[
    "=", "≠", "<", ">", "≤", "≥", "∈", "∉", "⊆", "⊂", "⊇", "⊃", "∀", "∃", "∃!", "∧", "∨", "¬", "↔", "!=", "<=", ">=",
    "<->", "∣", "≡", "∉",
];

/// Heads of common Mathlib predicates that do not follow the `Is...` naming.
const PROP_HEADS: &[&str] = &[
    "Continuous",
    "ContinuousOn",
    "ContinuousAt",
    "UniformContinuous",
    "UniformContinuousOn",
    "Differentiable",
    "DifferentiableOn",
    "DifferentiableAt",
    "HasDerivAt",
    "HasDerivWithinAt",
    "HasFDerivAt",
    "ContDiff",
    "ContDiffOn",
    "Monotone",
    "Antitone",
    "StrictMono",
    "StrictAnti",
    "MonotoneOn",
    "AntitoneOn",
    "StrictMonoOn",
    "Function.Injective",
    "Function.Surjective",
    "Function.Bijective",
    "Set.InjOn",
    "Set.SurjOn",
    "Set.BijOn",
    "Set.Finite",
    "Set.Infinite",
    "Set.Nonempty",
    "Nat.Prime",
    "Nat.Coprime",
    "Prime",
    "Irreducible",
    "Squarefree",
    "Summable",
    "Even",
    "Odd",
    "Tendsto",
    "Filter.Tendsto",
    "Integrable",
    "IntervalIntegrable",
    "Measurable",
    "True",
    "False",
];

/// Binders in source order with a syntactic Prop guess, plus the pieces
/// needed to rebuild the statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub binders: Vec<Binder>,
    pub conclusion: String,
}

impl Signature {
    pub fn into_parsed(self) -> ParsedTheorem {
        let (hypotheses, variables) = self.binders.into_iter().partition(|b| b.is_prop);
        ParsedTheorem {
            name: self.name,
            variables,
            hypotheses,
            conclusion: self.conclusion,
        }
    }

    /// Replaces the heuristic with externally supplied Prop flags.
    pub fn classify_with(mut self, flags: &[bool]) -> ParsedTheorem {
        for (b, &flag) in self.binders.iter_mut().zip(flags) {
            b.is_prop = flag && b.kind != BinderKind::Instance;
        }
        self.into_parsed()
    }
}

pub fn parse_statement(code: &str) -> Result<ParsedTheorem, ParseError> {
    Ok(parse_signature(code)?.into_parsed())
}

pub fn parse_signature(code: &str) -> Result<Signature, ParseError> {
    let tokens = lexer::tokenize(code)?;
    lexer::check_balanced(&tokens).map_err(|e| ParseError::Unbalanced(e.to_string()))?;
    let first = tokens.first().ok_or(ParseError::NotATheorem)?;
    if first.kind == TokenKind::Ident && CONTEXT_KEYWORDS.contains(&first.text) {
        return Err(ParseError::UnsupportedContext(first.text.to_string()));
    }
    if !first.is_ident("theorem") {
        return Err(ParseError::NotATheorem);
    }
    if let Some(kw) = tokens.iter().find(|t| {
        t.kind == TokenKind::Ident && CONTEXT_KEYWORDS.contains(&t.text) && t.start > 0 && at_line_start(code, t.start)
    }) {
        return Err(ParseError::UnsupportedContext(kw.text.to_string()));
    }
    let name = match tokens.get(1) {
        Some(t) if t.kind == TokenKind::Ident => t.text.to_string(),
        _ => return Err(ParseError::MissingName),
    };
    let mut binders = Vec::new();
    let mut i = 2;
    loop {
        let Some(tok) = tokens.get(i) else {
            return Err(ParseError::MissingColon);
        };
        match tok.kind {
            TokenKind::Open(c @ ('(' | '{' | '[' | '⦃')) => {
                let close = lexer::matching_close(&tokens, i).map_err(|e| ParseError::Unbalanced(e.to_string()))?;
                parse_group(code, c, &tokens[i + 1..close], &mut binders)?;
                i = close + 1;
            }
            TokenKind::Sym if tok.text == ":" => break,
            _ => return Err(ParseError::MissingColon),
        }
    }
    let concl_start = i + 1;
    let depths = lexer::depths(&tokens);
    let concl_end = (concl_start..tokens.len())
        .find(|&k| depths[k] == 0 && tokens[k].is_sym(":="))
        .unwrap_or(tokens.len());
    if concl_end <= concl_start {
        return Err(ParseError::MissingConclusion);
    }
    let conclusion = slice_text(code, &tokens[concl_start..concl_end]);
    Ok(Signature {
        name,
        binders,
        conclusion,
    })
}

fn at_line_start(code: &str, offset: usize) -> bool {
    code[..offset].rsplit('\n').next().is_some_and(|l| l.trim().is_empty())
}

fn slice_text(code: &str, toks: &[Token<'_>]) -> String {
    match (toks.first(), toks.last()) {
        (Some(a), Some(b)) => single_line(&code[a.start..b.end]),
        _ => String::new(),
    }
}

fn parse_group(code: &str, open: char, inner: &[Token<'_>], out: &mut Vec<Binder>) -> Result<(), ParseError> {
    let kind = match open {
        '(' => BinderKind::Explicit,
        '{' => BinderKind::Implicit,
        '[' => BinderKind::Instance,
        _ => BinderKind::StrictImplicit,
    };
    let group_text = || {
        let body = slice_text(code, inner);
        let close = match open {
            '(' => ')',
            '{' => '}',
            '[' => ']',
            _ => '⦄',
        };
        format!("{open}{body}{close}")
    };
    let depths = lexer::depths(inner);
    let colon = inner.iter().zip(&depths).position(|(t, d)| *d == 0 && t.is_sym(":"));
    let names_ok = |n: usize| n > 0 && inner[..n].iter().all(|t| t.kind == TokenKind::Ident || t.is_sym("_"));
    match (kind, colon) {
        (BinderKind::Instance, Some(c)) if c == 1 && names_ok(1) => {}
        (BinderKind::Instance, _) => {
            if inner.is_empty() {
                return Err(ParseError::MalformedBinder(group_text()));
            }
            out.push(Binder {
                name: String::new(),
                kind,
                type_text: slice_text(code, inner),
                is_prop: false,
            });
            return Ok(());
        }
        (_, Some(c)) if names_ok(c) => {}
        _ => return Err(ParseError::MalformedBinder(group_text())),
    }
    let c = colon.expect("checked above");
    let type_text = slice_text(code, &inner[c + 1..]);
    if type_text.is_empty() {
        return Err(ParseError::MalformedBinder(group_text()));
    }
    for name_tok in &inner[..c] {
        let name = name_tok.text.to_string();
        let is_prop = kind != BinderKind::Instance && heuristic_is_prop(&name, &type_text);
        out.push(Binder {
            name,
            kind,
            type_text: type_text.clone(),
            is_prop,
        });
    }
    Ok(())
}

/// Syntactic guess at whether a binder's type is a proposition.
///
/// A binder counts as a hypothesis when its name starts with `h`, when its
/// type contains a relation or logical connective outside any brackets, or
/// when the type's head is a predicate (`IsOpen`, `Continuous`, ...). A bare
/// `→` is not enough: `f : ℝ → ℝ` is data.
pub fn heuristic_is_prop(name: &str, type_text: &str) -> bool {
    if name.starts_with('h') {
        return true;
    }
    let Ok(tokens) = lexer::tokenize(type_text) else {
        return false;
    };
    let depths = lexer::depths(&tokens);
    if tokens
        .iter()
        .zip(&depths)
        .any(|(t, d)| *d == 0 && matches!(t.kind, TokenKind::Sym | TokenKind::Ident) && PROP_TOKENS.contains(&t.text))
    {
        return true;
    }
    match tokens.first() {
        Some(head) if head.kind == TokenKind::Ident => {
            let h = head.text;
            let is_pred = h
                .strip_prefix("Is")
                .and_then(|rest| rest.chars().next())
                .is_some_and(char::is_uppercase);
            let last = h.rsplit('.').next().unwrap_or(h);
            let dotted_pred = last
                .strip_prefix("Is")
                .and_then(|rest| rest.chars().next())
                .is_some_and(char::is_uppercase);
            is_pred || dotted_pred || PROP_HEADS.contains(&h)
        }
        _ => false,
    }
}

/// One line per component: the name, each binder (variables first, then
/// hypotheses), the conclusion, and the terminator.
pub fn format_multiline(parsed: &ParsedTheorem) -> String {
    let mut lines = vec![format!("theorem {}", parsed.name)];
    for b in parsed.binders() {
        lines.push(format!("  {}", b.render()));
    }
    lines.push(format!("  : {}", parsed.conclusion));
    lines.push(format!("  {TERMINATOR}"));
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(bs: &[Binder]) -> Vec<&str> {
        bs.iter().map(|b| b.name.as_str()).collect()
    }

    #[test]
    fn splits_grouped_binders_per_name() {
        let p = parse_statement(
            "theorem tm_name {R : Type*} [CommRing R] (n : ℕ) (A B : Matrix (Fin n) (Fin n) R) : (A * B).det = A.det * B.det := by sorry",
        )
        .unwrap();
        assert_eq!(names(&p.variables), vec!["R", "", "n", "A", "B"]);
        assert_eq!(p.variables[1].kind, BinderKind::Instance);
        assert_eq!(p.variables[1].type_text, "CommRing R");
        assert_eq!(p.variables[4].type_text, "Matrix (Fin n) (Fin n) R");
        assert!(p.hypotheses.is_empty());
        assert_eq!(p.conclusion, "(A * B).det = A.det * B.det");
    }

    #[test]
    fn classifies_hypotheses() {
        assert!(heuristic_is_prop("x", "x > 0"));
        assert!(heuristic_is_prop("hA", "Set X"));
        assert!(heuristic_is_prop("p", "IsOpen U"));
        assert!(heuristic_is_prop("p", "Function.Injective f"));
        assert!(!heuristic_is_prop("f", "ℝ → ℝ"));
        assert!(!heuristic_is_prop("S", "{x : ℕ // x > 0}"));
        assert!(!heuristic_is_prop("C", "Fin (n + 1) → ℝ"));
    }

    #[test]
    fn named_instance_binder() {
        let p = parse_statement("theorem t [inst : Group G] (g : G) : g = g := by sorry").unwrap();
        assert_eq!(p.variables[0].name, "inst");
        assert_eq!(p.variables[0].type_text, "Group G");
    }

    #[test]
    fn rejects_context_and_malformed_input() {
        assert!(matches!(
            parse_statement("variable (x : ℕ)"),
            Err(ParseError::UnsupportedContext(_))
        ));
        assert!(matches!(
            parse_statement("namespace Foo\ntheorem t : True := by sorry"),
            Err(ParseError::UnsupportedContext(_))
        ));
        assert!(matches!(
            parse_statement("theorem t : True := by sorry\nopen Real"),
            Err(ParseError::UnsupportedContext(_))
        ));
        assert!(matches!(
            parse_statement("theorem t (x : ℕ : x = x"),
            Err(ParseError::Unbalanced(_))
        ));
        assert!(matches!(
            parse_statement("theorem t (x : ℕ) x = x"),
            Err(ParseError::MissingColon)
        ));
        assert!(matches!(
            parse_statement("theorem t (x : ℕ) : := by sorry"),
            Err(ParseError::MissingConclusion)
        ));
        assert!(matches!(
            parse_statement("theorem t (x) : x := by sorry"),
            Err(ParseError::MalformedBinder(_))
        ));
        assert!(matches!(
            parse_statement("lemma t : True"),
            Err(ParseError::NotATheorem)
        ));
    }

    #[test]
    fn multiline_layout() {
        let p = parse_statement("theorem tm_name : 1 = 1 := by sorry").unwrap();
        let text = format_multiline(&p);
        assert_eq!(text, "theorem tm_name\n  : 1 = 1\n  := by sorry");
        let p = parse_statement("theorem tm_name (x : ℝ) (h : x > 0) : x ≥ 0 := by sorry").unwrap();
        assert_eq!(
            format_multiline(&p),
            "theorem tm_name\n  (x : ℝ)\n  (h : x > 0)\n  : x ≥ 0\n  := by sorry"
        );
        assert_eq!(parse_statement(&format_multiline(&p)).unwrap(), p);
    }

    #[test]
    fn conclusion_is_whitespace_normalized() {
        let p = parse_statement("theorem t (n : ℕ) :\n   n  +  0 = n\n := by\n  simp").unwrap();
        assert_eq!(p.conclusion, "n + 0 = n");
        let p = parse_statement("theorem t : (fun x : ℕ => x) 1 = 1").unwrap();
        assert_eq!(p.conclusion, "(fun x : ℕ => x) 1 = 1");
    }
}
