//! Pulling answers out of free-form model completions.

use std::sync::LazyLock;

use regex::Regex;

use crate::statement::normalize_code;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no ||...|| span in completion")]
    NoDelimitedSpan,
    #[error("delimited span is empty")]
    EmptySpan,
    #[error("no theorem in completion")]
    NoTheorem,
    #[error("malformed theorem: {0}")]
    Malformed(String),
}

const DELIM: &str = "||";

/// Content of the first `||...||` span, trimmed.
pub fn extract_delimited(text: &str) -> Result<String, ExtractError> {
    let open = text.find(DELIM).ok_or(ExtractError::NoDelimitedSpan)?;
    let rest = &text[open + DELIM.len()..];
    let close = rest.find(DELIM).ok_or(ExtractError::NoDelimitedSpan)?;
    non_empty(&rest[..close])
}

/// Content between the first and the last `||`. Lean code may itself
/// contain `||` (nested absolute values), so code answers use this form.
pub fn extract_delimited_outer(text: &str) -> Result<String, ExtractError> {
    let open = text.find(DELIM).ok_or(ExtractError::NoDelimitedSpan)?;
    let close = text
        .rfind(DELIM)
        .filter(|&c| c >= open + DELIM.len())
        .ok_or(ExtractError::NoDelimitedSpan)?;
    non_empty(&text[open + DELIM.len()..close])
}

fn non_empty(span: &str) -> Result<String, ExtractError> {
    let s = span.trim();
    if s.is_empty() {
        Err(ExtractError::EmptySpan)
    } else {
        Ok(s.to_string())
    }
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*```[A-Za-z0-9]*\s*$").unwrap());
static THEOREM_AT_LINE_START: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(theorem)\s").unwrap());
static THEOREM_ANYWHERE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(theorem)\s+\S").unwrap());
static SORRY_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r":=\s*by\s+sorry\b").unwrap());

/// The first theorem in a completion, from the `theorem` keyword through
/// the first `:= by sorry`, with code fences removed and the result
/// normalized. A `theorem` that starts a line is preferred over one that
/// appears inside prose.
pub fn extract_theorem_block(text: &str) -> Result<String, ExtractError> {
    let unfenced: String = text
        .lines()
        .filter(|l| !FENCE.is_match(l))
        .map(|l| l.replace("```", ""))
        .collect::<Vec<_>>()
        .join("\n");
    let start = THEOREM_AT_LINE_START
        .captures(&unfenced)
        .or_else(|| THEOREM_ANYWHERE.captures(&unfenced))
        .and_then(|c| c.get(1))
        .map(|m| m.start())
        .ok_or(ExtractError::NoTheorem)?;
    let body = &unfenced[start..];
    let block = match SORRY_END.find(body) {
        Some(m) => &body[..m.end()],
        None => body.split("\n\n").next().unwrap_or(body),
    };
    normalize_code(block).map_err(|e| ExtractError::Malformed(e.to_string()))
}

/// The proof tactics of a whole-proof completion: the indented lines after
/// the first `:= by`, fences removed.
pub fn extract_proof_tactics(completion: &str) -> Vec<String> {
    let body = completion.split_once(":= by").map(|(_, b)| b).unwrap_or("");
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```") && !l.starts_with("--"))
        .map(str::to_string)
        .collect()
}
