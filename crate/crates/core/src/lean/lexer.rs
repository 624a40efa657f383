//! A permissive tokenizer for Lean 4 statement text.
//!
//! It only knows enough of the surface syntax to find binder groups,
//! top-level operators and the `:=` terminator; it never elaborates.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Open(char),
    Close(char),
    Comma,
    /// Any operator or punctuation, including `:` and `:=`.
    Sym,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the first character.
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn is_sym(&self, s: &str) -> bool {
        self.kind == TokenKind::Sym && self.text == s
    }

    pub fn is_ident(&self, s: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

impl std::error::Error for LexError {}

/// Multi-character operators, longest first within each shared prefix.
const OPERATORS: &[&str] = &[
    "<;>", "<->", "⁻¹'", "∃!", ":=", "=>", "->", "<=", ">=", "!=", "==", "..", "::", "<|", "|>", "⁻¹", "++",
];

pub fn open_for(close: char) -> Option<char> {
    Some(match close {
        ')' => '(',
        ']' => '[',
        '}' => '{',
        '⟩' => '⟨',
        '⦄' => '⦃',
        '⟧' => '⟦',
        '⌋' => '⌊',
        '⌉' => '⌈',
        _ => return None,
    })
}

fn is_open(c: char) -> bool {
    matches!(c, '(' | '[' | '{' | '⟨' | '⦃' | '⟦' | '⌊' | '⌈')
}

fn is_close(c: char) -> bool {
    open_for(c).is_some()
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric()
        || matches!(c, '_' | '\'' | '.' | '!' | '?' | '✝')
        || ('\u{2070}'..='\u{209F}').contains(&c)
        || matches!(c, '¹' | '²' | '³')
}

pub fn tokenize(src: &str) -> Result<Vec<Token<'_>>, LexError> {
    let mut tokens = Vec::new();
    let bytes = src.as_bytes();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let rest = &src[i..];
        if rest.starts_with("--") {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        if rest.starts_with("/-") {
            let mut depth = 0usize;
            let mut j = i;
            loop {
                let r = &src[j..];
                if r.starts_with("/-") {
                    depth += 1;
                    j += 2;
                } else if r.starts_with("-/") {
                    depth -= 1;
                    j += 2;
                    if depth == 0 {
                        break;
                    }
                } else if let Some(ch) = r.chars().next() {
                    j += ch.len_utf8();
                } else {
                    return Err(LexError {
                        offset: i,
                        message: "unterminated comment".into(),
                    });
                }
            }
            while chars.peek().is_some_and(|&(k, _)| k < j) {
                chars.next();
            }
            continue;
        }
        if c == '"' {
            chars.next();
            let mut end = None;
            let mut escaped = false;
            for (k, ch) in chars.by_ref() {
                if escaped {
                    escaped = false;
                } else if ch == '\\' {
                    escaped = true;
                } else if ch == '"' {
                    end = Some(k + 1);
                    break;
                }
            }
            let end = end.ok_or_else(|| LexError {
                offset: i,
                message: "unterminated string literal".into(),
            })?;
            tokens.push(Token {
                kind: TokenKind::Str,
                text: &src[i..end],
                start: i,
                end,
            });
            continue;
        }
        if is_open(c) || is_close(c) || c == ',' {
            chars.next();
            let end = i + c.len_utf8();
            let kind = if c == ',' {
                TokenKind::Comma
            } else if is_open(c) {
                TokenKind::Open(c)
            } else {
                TokenKind::Close(c)
            };
            tokens.push(Token {
                kind,
                text: &src[i..end],
                start: i,
                end,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = i;
            while let Some(&(k, ch)) = chars.peek() {
                let decimal_point =
                    ch == '.' && bytes.get(k + 1).is_some_and(|b| b.is_ascii_digit()) && !src[i..k].contains('.');
                if ch.is_ascii_digit() || decimal_point {
                    end = k + ch.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                text: &src[i..end],
                start: i,
                end,
            });
            continue;
        }
        if is_ident_start(c) {
            let mut end = i;
            while let Some(&(k, ch)) = chars.peek() {
                // `x..y` is a range, not a dotted name.
                if ch == '.' && src[k..].starts_with("..") {
                    break;
                }
                if k == i || is_ident_continue(ch) {
                    end = k + ch.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident,
                text: &src[i..end],
                start: i,
                end,
            });
            continue;
        }
        let len = OPERATORS
            .iter()
            .find(|op| rest.starts_with(**op))
            .map(|op| op.len())
            .unwrap_or(c.len_utf8());
        let end = i + len;
        while chars.peek().is_some_and(|&(k, _)| k < end) {
            chars.next();
        }
        tokens.push(Token {
            kind: TokenKind::Sym,
            text: &src[i..end],
            start: i,
            end,
        });
    }
    Ok(tokens)
}

/// Index of the matching close bracket for the open bracket at `open_idx`.
pub fn matching_close(tokens: &[Token<'_>], open_idx: usize) -> Result<usize, LexError> {
    let mut stack: Vec<char> = Vec::new();
    for (i, tok) in tokens.iter().enumerate().skip(open_idx) {
        match tok.kind {
            TokenKind::Open(c) => stack.push(c),
            TokenKind::Close(c) => {
                let expected = open_for(c).expect("close bracket");
                match stack.pop() {
                    Some(top) if top == expected => {
                        if stack.is_empty() {
                            return Ok(i);
                        }
                    }
                    _ => {
                        return Err(LexError {
                            offset: tok.start,
                            message: format!("unexpected '{c}'"),
                        })
                    }
                }
            }
            _ => {}
        }
    }
    Err(LexError {
        offset: tokens[open_idx].start,
        message: format!("unclosed '{}'", tokens[open_idx].text),
    })
}

/// Verifies that brackets nest properly across the whole token stream.
pub fn check_balanced(tokens: &[Token<'_>]) -> Result<(), LexError> {
    let mut stack: Vec<(char, usize)> = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::Open(c) => stack.push((c, tok.start)),
            TokenKind::Close(c) => match stack.pop() {
                Some((top, _)) if Some(top) == open_for(c) => {}
                _ => {
                    return Err(LexError {
                        offset: tok.start,
                        message: format!("unexpected '{c}'"),
                    })
                }
            },
            _ => {}
        }
    }
    match stack.pop() {
        Some((c, offset)) => Err(LexError {
            offset,
            message: format!("unclosed '{c}'"),
        }),
        None => Ok(()),
    }
}

/// Bracket depth of every token (depth before the token for opens, after for
/// closes, so a bracket pair sits at the depth of its surroundings).
pub fn depths(tokens: &[Token<'_>]) -> Vec<usize> {
    let mut depth = 0usize;
    tokens
        .iter()
        .map(|t| match t.kind {
            TokenKind::Open(_) => {
                depth += 1;
                depth - 1
            }
            TokenKind::Close(_) => {
                depth = depth.saturating_sub(1);
                depth
            }
            _ => depth,
        })
        .collect()
}

/// 1-based line and 0-based codepoint column of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (u32, u32) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() as u32 + 1;
    let col = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) as u32;
    (line, col)
}
