//! Infoview-style goal states and their reconstruction into statements.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{self, TokenKind};
use crate::statement::{single_line, TERMINATOR};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GoalError {
    #[error("goal state has no `⊢` line")]
    MissingTurnstile,
    #[error("empty goal")]
    EmptyGoal,
    #[error("hypothesis line without `:` separator: `{0}`")]
    MissingSeparator(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalState {
    /// `names : type` lines, variables included, in context order.
    pub hypothesis_lines: Vec<String>,
    pub goal: String,
}

/// Splits a `names : type` context line at its first top-level colon.
pub fn split_hypothesis(line: &str) -> Result<(Vec<String>, String), GoalError> {
    let missing = || GoalError::MissingSeparator(line.to_string());
    let tokens = lexer::tokenize(line).map_err(|_| missing())?;
    let depths = lexer::depths(&tokens);
    let colon = tokens
        .iter()
        .zip(&depths)
        .position(|(t, d)| *d == 0 && t.is_sym(":"))
        .ok_or_else(missing)?;
    if colon == 0
        || !tokens[..colon]
            .iter()
            .all(|t| t.kind == TokenKind::Ident || t.is_sym("_"))
    {
        return Err(missing());
    }
    let names = tokens[..colon].iter().map(|t| t.text.to_string()).collect();
    let ty = line[tokens[colon].end..].trim();
    if ty.is_empty() {
        return Err(missing());
    }
    Ok((names, single_line(ty)))
}

impl GoalState {
    pub fn new(hypothesis_lines: Vec<String>, goal: impl Into<String>) -> Result<Self, GoalError> {
        let goal = goal.into();
        if goal.trim().is_empty() {
            return Err(GoalError::EmptyGoal);
        }
        Ok(Self {
            hypothesis_lines,
            goal: goal.trim().to_string(),
        })
    }

    /// Parses one goal as printed by the Infoview. Indented lines continue
    /// the previous entry; `case` tags are skipped.
    pub fn parse(text: &str) -> Result<Self, GoalError> {
        let mut entries: Vec<String> = Vec::new();
        let mut goal: Option<String> = None;
        for raw in text.lines() {
            if raw.trim().is_empty() {
                continue;
            }
            let continuation = raw.starts_with(char::is_whitespace);
            let line = raw.trim();
            if let Some(g) = goal.as_mut() {
                g.push(' ');
                g.push_str(line);
                continue;
            }
            if let Some(rest) = line.strip_prefix('⊢') {
                goal = Some(rest.trim().to_string());
                continue;
            }
            if !continuation && (line == "case" || line.starts_with("case ")) && entries.is_empty() {
                continue;
            }
            match entries.last_mut() {
                Some(last) if continuation => {
                    last.push(' ');
                    last.push_str(line);
                }
                _ => entries.push(line.to_string()),
            }
        }
        let goal = goal.ok_or(GoalError::MissingTurnstile)?;
        let lines = entries.iter().map(|e| single_line(e)).collect();
        Self::new(lines, single_line(&goal))
    }

    /// Splits a multi-goal Infoview rendering on blank lines between goals.
    pub fn parse_all(text: &str) -> Result<Vec<Self>, GoalError> {
        let mut out = Vec::new();
        let mut current = String::new();
        for line in text.lines() {
            current.push_str(line);
            current.push('\n');
            if line.trim().is_empty() && current.contains('⊢') {
                out.push(Self::parse(&current)?);
                current.clear();
            }
        }
        if current.contains('⊢') {
            out.push(Self::parse(&current)?);
        } else if !current.trim().is_empty() {
            return Err(GoalError::MissingTurnstile);
        }
        Ok(out)
    }

    pub fn hypotheses(&self) -> Result<Vec<(Vec<String>, String)>, GoalError> {
        self.hypothesis_lines.iter().map(|l| split_hypothesis(l)).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.hypothesis_lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("⊢ ");
        out.push_str(&self.goal);
        out
    }
}

impl fmt::Display for GoalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn is_anonymous_instance(name: &str) -> bool {
    name.starts_with("inst✝")
}

/// Rebuilds a single-line statement from a goal state: every context line
/// becomes an explicit binder, anonymous instances (`inst✝ : Group G`)
/// become `[Group G]`, and the goal becomes the conclusion.
pub fn state_to_statement(state: &GoalState, name: &str) -> Result<String, GoalError> {
    let mut out = format!("theorem {name}");
    for line in &state.hypothesis_lines {
        let (names, ty) = split_hypothesis(line)?;
        let (instances, named): (Vec<_>, Vec<_>) = names.into_iter().partition(|n| is_anonymous_instance(n));
        for _ in &instances {
            out.push_str(&format!(" [{ty}]"));
        }
        if !named.is_empty() {
            out.push_str(&format!(" ({} : {ty})", named.join(" ")));
        }
    }
    out.push_str(&format!(" : {} {TERMINATOR}", state.goal));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_infoview_text() {
        let s = GoalState::parse("case h\nx y : ℝ\nh : x >\n  0\n⊢ x ≥\n  0").unwrap();
        assert_eq!(s.hypothesis_lines, vec!["x y : ℝ", "h : x > 0"]);
        assert_eq!(s.goal, "x ≥ 0");
        assert_eq!(GoalState::parse(&s.render()).unwrap(), s);
        assert_eq!(GoalState::parse("x : ℕ"), Err(GoalError::MissingTurnstile));
        assert_eq!(GoalState::parse("⊢   "), Err(GoalError::EmptyGoal));
    }

    #[test]
    fn reconstructs_statements() {
        let s = GoalState::parse("x : ℝ\nh : x > 0\n⊢ x ≥ 0").unwrap();
        assert_eq!(
            state_to_statement(&s, "tm_name").unwrap(),
            "theorem tm_name (x : ℝ) (h : x > 0) : x ≥ 0 := by sorry"
        );
        let empty = GoalState::parse("⊢ 1 + 1 = 2").unwrap();
        assert_eq!(
            state_to_statement(&empty, "tm_name").unwrap(),
            "theorem tm_name : 1 + 1 = 2 := by sorry"
        );
        let inst = GoalState::parse("G : Type u_1\ninst✝ : Group G\ng : G\n⊢ g * 1 = g").unwrap();
        assert_eq!(
            state_to_statement(&inst, "tm_name").unwrap(),
            "theorem tm_name (G : Type u_1) [Group G] (g : G) : g * 1 = g := by sorry"
        );
        let bad = GoalState::new(vec!["no separator here".into()], "True").unwrap();
        assert!(matches!(
            state_to_statement(&bad, "tm_name"),
            Err(GoalError::MissingSeparator(_))
        ));
    }

    #[test]
    fn splits_multiple_goals() {
        let goals = GoalState::parse_all("x : ℕ\n⊢ x = x\n\nx : ℕ\n⊢ 0 ≤ x").unwrap();
        assert_eq!(goals.len(), 2);
        assert_eq!(goals[1].goal, "0 ≤ x");
    }
}
