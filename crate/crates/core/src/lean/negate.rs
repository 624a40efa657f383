//! Textual negation with `push_neg`-style normalization, used by the mock
//! toolchain to emulate `contrapose!`.
//!
//! Only the propositional skeleton is understood: quantifiers, the four
//! binary connectives, `¬`, and top-level relations. Anything else is
//! negated as an opaque atom.

use super::lexer::{self, Token, TokenKind};
use crate::statement::single_line;

/// Binary connectives from loosest to tightest binding.
const CONNECTIVES: &[&[&str]] = &[&["↔", "<->"], &["→", "->"], &["∨"], &["∧"]];

const BINDERS: &[&str] = &["∀", "∃", "∃!", "fun", "λ"];

fn depth0<'a>(tokens: &'a [Token<'a>]) -> impl Iterator<Item = (usize, &'a Token<'a>)> + 'a {
    let depths = lexer::depths(tokens);
    tokens.iter().enumerate().filter(move |(i, _)| depths[*i] == 0)
}

fn strip_parens(text: &str) -> &str {
    let mut t = text.trim();
    loop {
        let Ok(tokens) = lexer::tokenize(t) else {
            return t;
        };
        let wrapped = matches!(tokens.first().map(|x| x.kind), Some(TokenKind::Open('(')))
            && lexer::matching_close(&tokens, 0).is_ok_and(|c| c == tokens.len() - 1);
        if !wrapped {
            return t;
        }
        t = t[tokens[0].end..tokens[tokens.len() - 1].start].trim();
    }
}

/// Index of the first top-level binder keyword; everything after it belongs
/// to that binder's body.
fn scope_end(tokens: &[Token<'_>]) -> usize {
    depth0(tokens)
        .find(|(_, t)| matches!(t.kind, TokenKind::Ident | TokenKind::Sym) && BINDERS.contains(&t.text))
        .map(|(i, _)| i)
        .unwrap_or(tokens.len())
}

/// Whether `text` needs parentheses when used as an operand of a connective.
fn is_compound(text: &str) -> bool {
    let Ok(tokens) = lexer::tokenize(text) else {
        return true;
    };
    if tokens
        .first()
        .is_some_and(|t| BINDERS.contains(&t.text) && matches!(t.kind, TokenKind::Ident | TokenKind::Sym))
    {
        return true;
    }
    let end = scope_end(&tokens);
    depth0(&tokens).any(|(i, t)| i < end && CONNECTIVES.iter().any(|ops| ops.contains(&t.text))) || end < tokens.len()
}

fn wrap(text: &str) -> String {
    let t = text.trim();
    if is_compound(t) {
        format!("({t})")
    } else {
        t.to_string()
    }
}

/// Negates a proposition, pushing the negation inwards.
pub fn negate(prop: &str) -> String {
    single_line(&negate_inner(prop))
}

fn negate_inner(prop: &str) -> String {
    let t = strip_parens(prop);
    let Ok(tokens) = lexer::tokenize(t) else {
        return format!("¬({t})");
    };
    if tokens.is_empty() {
        return "¬True".to_string();
    }
    let end = scope_end(&tokens);

    if end == 0 {
        let head = tokens[0].text;
        let comma = depth0(&tokens)
            .find(|(_, tok)| tok.kind == TokenKind::Comma)
            .map(|(i, _)| i);
        let flipped = match head {
            "∀" => Some("∃"),
            "∃" => Some("∀"),
            _ => None,
        };
        if let (Some(q), Some(c)) = (flipped, comma) {
            let binders = t[tokens[0].end..tokens[c].start].trim();
            let body = &t[tokens[c].end..];
            return format!("{q} {binders}, {}", negate_inner(body));
        }
        return format!("¬({t})");
    }

    for ops in CONNECTIVES {
        let hit = depth0(&tokens).find(|(i, tok)| *i < end && tok.kind == TokenKind::Sym && ops.contains(&tok.text));
        if let Some((_, tok)) = hit {
            let lhs = t[..tok.start].trim();
            let rhs = t[tok.end..].trim();
            return match ops[0] {
                "↔" => format!(
                    "{} ∧ {} ∨ {} ∧ {}",
                    wrap(lhs),
                    wrap(&negate_inner(rhs)),
                    wrap(&negate_inner(lhs)),
                    wrap(rhs)
                ),
                "→" => format!("{} ∧ {}", wrap(lhs), wrap(&negate_inner(rhs))),
                "∨" => format!("{} ∧ {}", wrap(&negate_inner(lhs)), wrap(&negate_inner(rhs))),
                _ => {
                    let neg_rhs = negate_inner(rhs);
                    format!("{} → {}", wrap(lhs), neg_rhs)
                }
            };
        }
    }

    if tokens[0].is_sym("¬") {
        return t[tokens[0].end..].trim().to_string();
    }

    const RELATIONS: &[&str] = &["=", "≠", "<", ">", "≤", "≥", "∈", "∉", "<=", ">=", "!="];
    let rel = depth0(&tokens).find(|(i, tok)| *i < end && tok.kind == TokenKind::Sym && RELATIONS.contains(&tok.text));
    if let Some((_, tok)) = rel {
        let lhs = t[..tok.start].trim();
        let rhs = t[tok.end..].trim();
        return match tok.text {
            "=" => format!("{lhs} ≠ {rhs}"),
            "≠" | "!=" => format!("{lhs} = {rhs}"),
            "<" => format!("{rhs} ≤ {lhs}"),
            "≤" | "<=" => format!("{rhs} < {lhs}"),
            ">" => format!("{lhs} ≤ {rhs}"),
            "≥" | ">=" => format!("{lhs} < {rhs}"),
            "∈" => format!("{lhs} ∉ {rhs}"),
            _ => format!("{lhs} ∈ {rhs}"),
        };
    }
    format!("¬{t}")
}
