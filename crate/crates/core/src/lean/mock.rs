//! An in-process stand-in for the Lean toolchain.
//!
//! Fixture entries take precedence; everything else is answered by a small
//! syntactic checker and a tactic engine that understands `intro`, `have`,
//! `constructor`, `contrapose!`, `push_neg` and the usual closing tactics.
//! The same engine backs the `forge-mock-lean` binary, so the process pool
//! can be exercised over the real wire protocol.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::lexer::{self, Token, TokenKind};
use super::negate::negate;
use super::parse::{heuristic_is_prop, parse_signature, ParseError};
use super::protocol::{Command, Message, Request, Response};
use super::{BinderKind, GoalState, LeanError, Session, Toolchain};
use crate::statement::single_line;

/// Fixtures frozen from toolchain runs plus the case-study compile failures.
pub const BUNDLED_FIXTURES: &str = include_str!("../../fixtures/lean_mock.json");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileFixture {
    pub code: String,
    #[serde(default)]
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFixture {
    #[serde(default)]
    pub goals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticFixture {
    pub code: String,
    pub tactics: Vec<String>,
    /// One entry per tactic.
    pub steps: Vec<StepFixture>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContraposeFixture {
    pub code: String,
    pub hyp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFixtures {
    #[serde(default)]
    pub compile: Vec<CompileFixture>,
    #[serde(default)]
    pub tactics: Vec<TacticFixture>,
    #[serde(default)]
    pub contrapose: Vec<ContraposeFixture>,
    /// Identifiers the checker reports as unknown constants.
    #[serde(default)]
    pub unknown_identifiers: Vec<String>,
}

impl MockFixtures {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_FIXTURES).expect("bundled toolchain fixtures are valid")
    }

    pub fn load(path: &Path) -> Result<Self, LeanError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LeanError::Unavailable(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LeanError::Protocol(format!("{}: {e}", path.display())))
    }

    /// Adds `other`'s entries; they win over existing ones with the same key.
    pub fn merge(mut self, other: MockFixtures) -> Self {
        let mut compile = other.compile;
        compile.extend(self.compile);
        self.compile = compile;
        let mut tactics = other.tactics;
        tactics.extend(self.tactics);
        self.tactics = tactics;
        let mut contrapose = other.contrapose;
        contrapose.extend(self.contrapose);
        self.contrapose = contrapose;
        self.unknown_identifiers.extend(other.unknown_identifiers);
        self
    }
}

fn key(code: &str) -> String {
    single_line(strip_header(code).1)
}

/// Splits leading `import` lines from the declaration body; returns the
/// byte offset of the body.
fn strip_header(code: &str) -> (usize, &str) {
    let mut offset = 0;
    for line in code.split_inclusive('\n') {
        let t = line.trim();
        if t.is_empty() || t.starts_with("import ") {
            offset += line.len();
        } else {
            break;
        }
    }
    (offset, &code[offset..])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Goal {
    hyps: Vec<(String, String)>,
    target: String,
}

impl Goal {
    fn render(&self) -> String {
        let mut lines: Vec<(Vec<&str>, &str)> = Vec::new();
        for (name, ty) in &self.hyps {
            match lines.last_mut() {
                Some((names, last_ty)) if *last_ty == ty.as_str() => names.push(name),
                _ => lines.push((vec![name], ty)),
            }
        }
        let mut out = String::new();
        for (names, ty) in lines {
            out.push_str(&format!("{} : {ty}\n", names.join(" ")));
        }
        out.push_str(&format!("⊢ {}", self.target));
        out
    }

    fn hyp_type(&self, name: &str) -> Option<&str> {
        self.hyps.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ProofState {
    history: Vec<String>,
    goals: Vec<Goal>,
}

fn superscript(n: usize) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    if n == 0 {
        return String::new();
    }
    n.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).expect("decimal digit") as usize])
        .collect()
}

fn initial_goal(code: &str) -> Result<Goal, String> {
    let (_, body) = strip_header(code);
    let sig = parse_signature(body).map_err(|e| e.to_string())?;
    let instances = sig.binders.iter().filter(|b| b.name.is_empty()).count();
    let mut seen = 0;
    let mut hyps = Vec::new();
    for b in &sig.binders {
        let name = if b.name.is_empty() {
            seen += 1;
            format!("inst✝{}", superscript(instances - seen))
        } else {
            b.name.clone()
        };
        hyps.push((name, b.type_text.clone()));
    }
    Ok(Goal {
        hyps,
        target: sig.conclusion,
    })
}

const CLOSING: &[&str] = &[
    "exact",
    "linarith",
    "nlinarith",
    "omega",
    "simp",
    "simp_all",
    "norm_num",
    "decide",
    "aesop",
    "tauto",
    "positivity",
    "trivial",
    "ring",
    "ring_nf",
    "field_simp",
    "apply",
    "exact?",
    "exact_mod_cast",
    "norm_cast",
    "gcongr",
    "polyrith",
    "continuity",
    "measurability",
    "bound",
    "sorry",
    "refine",
    "use",
    "exists",
];

fn same_prop(a: &str, b: &str) -> bool {
    let strip = |s: &str| single_line(s.trim().trim_start_matches('(').trim_end_matches(')'));
    single_line(a) == single_line(b) || strip(a) == strip(b)
}

fn tokens_of(text: &str) -> Result<Vec<Token<'_>>, String> {
    lexer::tokenize(text).map_err(|e| e.to_string())
}

fn rename_ident(text: &str, old: &str, new: &str) -> String {
    if old == new {
        return text.to_string();
    }
    let Ok(tokens) = lexer::tokenize(text) else {
        return text.to_string();
    };
    let mut out = String::new();
    let mut last = 0;
    for t in &tokens {
        if t.kind == TokenKind::Ident && t.text == old {
            out.push_str(&text[last..t.start]);
            out.push_str(new);
            last = t.end;
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Element type of a set-like context entry (`Set T`, `Finset T`).
fn element_type(goal: &Goal, collection: &str) -> Option<String> {
    let ty = goal.hyp_type(collection.trim())?;
    ["Set ", "Finset "]
        .iter()
        .find_map(|p| ty.strip_prefix(p))
        .map(|t| t.trim().to_string())
}

fn intro_one(goal: &Goal, name: Option<&str>) -> Result<Goal, String> {
    let target = goal.target.trim();
    let tokens = tokens_of(target)?;
    let depths = lexer::depths(&tokens);
    let first = tokens.first().ok_or("no goal")?;
    let mut next = goal.clone();
    if first.is_sym("∀") {
        let comma = (0..tokens.len())
            .find(|&i| depths[i] == 0 && tokens[i].kind == TokenKind::Comma)
            .ok_or("malformed binder")?;
        let body = target[tokens[comma].end..].trim();
        let binders = &tokens[1..comma];
        let text_of = |toks: &[Token<'_>]| match (toks.first(), toks.last()) {
            (Some(a), Some(b)) => target[a.start..b.end].to_string(),
            _ => String::new(),
        };
        let (var, ty, rest): (String, String, Option<String>) = match binders.first().map(|t| t.kind) {
            Some(TokenKind::Open(_)) => {
                let close = lexer::matching_close(binders, 0).map_err(|e| e.to_string())?;
                let group = &binders[1..close];
                let colon = group.iter().position(|t| t.is_sym(":")).ok_or("untyped binder")?;
                let names: Vec<&str> = group[..colon].iter().map(|t| t.text).collect();
                let ty = text_of(&group[colon + 1..]);
                let mut rest_parts = Vec::new();
                if names.len() > 1 {
                    rest_parts.push(format!("({} : {ty})", names[1..].join(" ")));
                }
                let tail = text_of(&binders[close + 1..]);
                if !tail.is_empty() {
                    rest_parts.push(tail);
                }
                let rest = (!rest_parts.is_empty()).then(|| rest_parts.join(" "));
                (names[0].to_string(), ty, rest)
            }
            Some(TokenKind::Ident) => {
                let var = binders[0].text.to_string();
                let colon = binders.iter().position(|t| t.is_sym(":"));
                match colon {
                    Some(c) if binders[..c].iter().all(|t| t.kind == TokenKind::Ident) => {
                        let ty = text_of(&binders[c + 1..]);
                        let rest = (c > 1).then(|| {
                            let names: Vec<&str> = binders[1..c].iter().map(|t| t.text).collect();
                            format!("{} : {ty}", names.join(" "))
                        });
                        (var, ty, rest)
                    }
                    None if binders.len() >= 3 => {
                        // Binder predicate: `∀ x ∈ A, P` becomes `x ∈ A → P`.
                        let op = binders[1].text;
                        let rhs = text_of(&binders[2..]);
                        let ty = match op {
                            "∈" | "∉" => element_type(goal, &rhs),
                            _ => None,
                        }
                        .ok_or_else(|| format!("cannot infer the type of '{var}'"))?;
                        let new_name = name.unwrap_or(&var);
                        let body = format!("{var} {op} {rhs} → {body}");
                        next.hyps.push((new_name.to_string(), ty));
                        next.target = single_line(&rename_ident(&body, &var, new_name));
                        return Ok(next);
                    }
                    _ => return Err(format!("cannot infer the type of '{var}'")),
                }
            }
            _ => return Err("malformed binder".into()),
        };
        let new_name = name.unwrap_or(&var).to_string();
        let rest_target = match rest {
            Some(r) => format!("∀ {r}, {body}"),
            None => body.to_string(),
        };
        next.hyps.push((new_name.clone(), single_line(&ty)));
        next.target = single_line(&rename_ident(&rest_target, &var, &new_name));
        return Ok(next);
    }
    if first.is_sym("¬") {
        next.hyps
            .push((name.unwrap_or("a✝").to_string(), single_line(&target[first.end..])));
        next.target = "False".into();
        return Ok(next);
    }
    let stop = (0..tokens.len())
        .find(|&i| depths[i] == 0 && (tokens[i].is_sym("∃") || tokens[i].is_ident("fun") || tokens[i].is_sym("∃!")))
        .unwrap_or(tokens.len());
    let arrow = (0..stop).find(|&i| depths[i] == 0 && (tokens[i].is_sym("→") || tokens[i].is_sym("->")));
    match arrow {
        Some(a) => {
            let lhs = target[..tokens[a].start].trim();
            let rhs = target[tokens[a].end..].trim();
            next.hyps.push((name.unwrap_or("a✝").to_string(), single_line(lhs)));
            next.target = single_line(rhs);
            Ok(next)
        }
        None => Err("no additional binders or hypotheses".into()),
    }
}

fn contrapose_goal(goal: &Goal, hyp: &str) -> Result<Goal, String> {
    let idx = goal
        .hyps
        .iter()
        .rposition(|(n, _)| n == hyp)
        .ok_or_else(|| format!("unknown identifier '{hyp}'"))?;
    let (name, ty) = goal.hyps[idx].clone();
    if !heuristic_is_prop(&name, &ty) || name.starts_with("inst✝") {
        return Err(format!("contrapose: '{hyp}' is not a proposition"));
    }
    let mut next = goal.clone();
    next.hyps.remove(idx);
    next.hyps.push((name, negate(&goal.target)));
    next.target = negate(&ty);
    Ok(next)
}

/// Splits `have name : T := proof`.
fn parse_have(rest: &str) -> Result<(String, String, String), String> {
    let tokens = tokens_of(rest)?;
    let depths = lexer::depths(&tokens);
    let colon = (0..tokens.len())
        .find(|&i| depths[i] == 0 && tokens[i].is_sym(":"))
        .ok_or("have: expected ':'")?;
    let name = match colon {
        0 => "this".to_string(),
        1 if tokens[0].kind == TokenKind::Ident => tokens[0].text.to_string(),
        _ => return Err("have: malformed name".into()),
    };
    let assign = (colon..tokens.len())
        .find(|&i| depths[i] == 0 && tokens[i].is_sym(":="))
        .ok_or("have: expected ':='")?;
    let ty = rest[tokens[colon].end..tokens[assign].start].trim();
    let proof = rest[tokens[assign].end..].trim();
    if ty.is_empty() || proof.is_empty() {
        return Err("have: expected term".into());
    }
    Ok((name, single_line(ty), proof.to_string()))
}

fn close_with(goal: &Goal, head: &str, arg: &str) -> Result<(), String> {
    match head {
        "assumption" => goal
            .hyps
            .iter()
            .any(|(_, t)| same_prop(t, &goal.target))
            .then_some(())
            .ok_or_else(|| "assumption failed".into()),
        "rfl" => {
            let tokens = tokens_of(&goal.target)?;
            let depths = lexer::depths(&tokens);
            let rel = (0..tokens.len())
                .find(|&i| depths[i] == 0 && ["=", "≤", "≥", "↔"].contains(&tokens[i].text))
                .ok_or("rfl: goal is not a reflexive relation")?;
            let lhs = &goal.target[..tokens[rel].start];
            let rhs = &goal.target[tokens[rel].end..];
            if single_line(lhs) == single_line(rhs) {
                Ok(())
            } else {
                Err("The rfl tactic failed".into())
            }
        }
        "exact" => match goal.hyp_type(arg.trim()) {
            Some(t) if !same_prop(t, &goal.target) => Err(format!(
                "type mismatch\n  {}\nhas type\n  {t} : Prop\nbut is expected to have type\n  {} : Prop",
                arg.trim(),
                goal.target
            )),
            _ if arg.trim().is_empty() => Err("exact: expected term".into()),
            _ => Ok(()),
        },
        _ => Ok(()),
    }
}

fn apply_tactic(goals: &[Goal], tactic: &str) -> Result<Vec<Goal>, String> {
    let tactic = tactic.trim().trim_start_matches(['·', '.']).trim();
    let goal = goals.first().ok_or("no goals to be proved")?;
    let rest_goals = &goals[1..];
    let (head, arg) = match tactic.find(char::is_whitespace) {
        Some(i) => (&tactic[..i], tactic[i..].trim()),
        None => (tactic, ""),
    };
    let with_rest = |new: Vec<Goal>| {
        let mut out = new;
        out.extend_from_slice(rest_goals);
        out
    };
    match head {
        "intro" | "intros" | "rintro" => {
            let mut g = goal.clone();
            if arg.is_empty() {
                g = intro_one(&g, None)?;
                if head == "intros" {
                    while let Ok(n) = intro_one(&g, None) {
                        g = n;
                    }
                }
            } else {
                for name in arg.split_whitespace() {
                    g = intro_one(&g, Some(name))?;
                }
            }
            Ok(with_rest(vec![g]))
        }
        "have" => {
            let (name, ty, proof) = parse_have(arg)?;
            if let Some(inner) = proof.strip_prefix("by") {
                let inner = inner.trim();
                let inner_head = inner.split_whitespace().next().unwrap_or("");
                if !CLOSING.contains(&inner_head) && !matches!(inner_head, "rfl" | "assumption") {
                    return Err(format!("unknown tactic '{inner_head}'"));
                }
            }
            let mut g = goal.clone();
            g.hyps.push((name, ty));
            Ok(with_rest(vec![g]))
        }
        "constructor" => {
            let t = goal.target.trim();
            let tokens = tokens_of(t)?;
            let depths = lexer::depths(&tokens);
            let stop = (0..tokens.len())
                .find(|&i| depths[i] == 0 && ["∀", "∃", "∃!", "fun"].contains(&tokens[i].text))
                .unwrap_or(tokens.len());
            let find = |op: &str| (0..stop).find(|&i| depths[i] == 0 && tokens[i].is_sym(op));
            if let Some(i) = find("↔") {
                let (l, r) = (t[..tokens[i].start].trim(), t[tokens[i].end..].trim());
                let mk = |a: &str, b: &str| Goal {
                    hyps: goal.hyps.clone(),
                    target: format!("{a} → {b}"),
                };
                return Ok(with_rest(vec![mk(l, r), mk(r, l)]));
            }
            if let Some(i) = find("∧") {
                let (l, r) = (t[..tokens[i].start].trim(), t[tokens[i].end..].trim());
                let mk = |a: &str| Goal {
                    hyps: goal.hyps.clone(),
                    target: single_line(a),
                };
                return Ok(with_rest(vec![mk(l), mk(r)]));
            }
            Err("constructor failed: target is not an inductive type with one constructor".into())
        }
        "contrapose!" | "contrapose" => {
            let hyp = arg
                .split_whitespace()
                .next()
                .ok_or("contrapose: expected a hypothesis name")?;
            Ok(with_rest(vec![contrapose_goal(goal, hyp)?]))
        }
        "push_neg" => {
            let t = goal.target.trim();
            let mut g = goal.clone();
            match t.strip_prefix('¬') {
                Some(inner) => g.target = negate(inner),
                None => return Err("push_neg made no progress".into()),
            }
            Ok(with_rest(vec![g]))
        }
        _ if arg.starts_with("at ") || arg.contains(" at ") => Ok(goals.to_vec()),
        "rfl" | "assumption" => {
            close_with(goal, head, arg)?;
            Ok(rest_goals.to_vec())
        }
        _ if CLOSING.contains(&head) => {
            close_with(goal, head, arg)?;
            Ok(rest_goals.to_vec())
        }
        _ => Err(format!("unknown tactic '{head}'")),
    }
}

/// The in-process engine answering protocol requests.
#[derive(Debug, Clone, Default)]
pub struct MockLean {
    compile: HashMap<String, Vec<Message>>,
    tactics: Vec<TacticFixture>,
    contrapose: HashMap<(String, String), ContraposeFixture>,
    unknown: Vec<String>,
}

const BINARY_OPS: &[&str] = &[
    "+", "*", "/", "^", "=", "≠", "<", ">", "≤", "≥", "∧", "∨", "↔", "→", "∈", "∉", "⊆", "⊂", "∣", "•", "∘", "∩", "∪",
    "%", "<=", ">=", "!=", "->", "<->", "++", "×", "\\",
];

fn is_binary(t: &Token<'_>) -> bool {
    t.kind == TokenKind::Sym && BINARY_OPS.contains(&t.text)
}

impl MockLean {
    pub fn new(fixtures: MockFixtures) -> Self {
        let mut engine = Self::default();
        for f in fixtures.compile.into_iter().rev() {
            engine.compile.insert(key(&f.code), f.messages);
        }
        for f in fixtures.contrapose.into_iter().rev() {
            engine.contrapose.insert((key(&f.code), f.hyp.clone()), f);
        }
        engine.tactics = fixtures
            .tactics
            .into_iter()
            .map(|mut f| {
                f.code = key(&f.code);
                f
            })
            .collect();
        engine.unknown = fixtures.unknown_identifiers;
        engine
    }

    pub fn bundled() -> Self {
        Self::new(MockFixtures::bundled())
    }

    pub fn handle(&self, req: &Request) -> Response {
        let mut resp = match req.cmd {
            Command::Compile => Response {
                messages: self.check(&req.code),
                ..Response::default()
            },
            Command::Parse => match parse_signature(strip_header(&req.code).1) {
                Ok(sig) => Response {
                    binder_is_prop: Some(sig.binders.iter().map(|b| b.is_prop).collect()),
                    ..Response::default()
                },
                Err(e) => Response::failure(req.id, e.to_string()),
            },
            Command::RunTactic => self.run_tactic(req),
            Command::Contrapose => self.contrapose(req),
        };
        resp.id = req.id;
        resp
    }

    fn run_tactic(&self, req: &Request) -> Response {
        let Some(tactic) = req.tactic.as_deref() else {
            return Response::failure(req.id, "run_tactic needs a tactic");
        };
        let state = match &req.state {
            Some(s) => match serde_json::from_str::<ProofState>(s) {
                Ok(st) => st,
                Err(e) => return Response::failure(req.id, format!("bad state: {e}")),
            },
            None => match initial_goal(&req.code) {
                Ok(g) => ProofState {
                    history: vec![],
                    goals: vec![g],
                },
                Err(e) => return Response::failure(req.id, e),
            },
        };
        let mut history = state.history.clone();
        history.push(tactic.to_string());
        let code_key = key(&req.code);
        let scripted = self.tactics.iter().find(|f| {
            f.code == code_key && f.tactics.len() >= history.len() && f.tactics[..history.len()] == history[..]
        });
        if let Some(f) = scripted {
            let step = &f.steps[history.len() - 1];
            if let Some(err) = &step.error {
                return Response {
                    messages: vec![Message::error(1, 0, err.clone())],
                    ..Response::default()
                };
            }
            let goals: Result<Vec<Goal>, _> = step
                .goals
                .iter()
                .map(|g| {
                    GoalState::parse(g).map_err(|e| e.to_string()).and_then(|gs| {
                        let mut hyps = Vec::new();
                        for line in &gs.hypothesis_lines {
                            let (names, ty) = super::goal::split_hypothesis(line).map_err(|e| e.to_string())?;
                            hyps.extend(names.into_iter().map(|n| (n, ty.clone())));
                        }
                        Ok(Goal { hyps, target: gs.goal })
                    })
                })
                .collect();
            return match goals {
                Ok(goals) => self.goals_response(history, goals),
                Err(e) => Response::failure(req.id, e),
            };
        }
        match apply_tactic(&state.goals, tactic) {
            Ok(goals) => self.goals_response(history, goals),
            Err(e) => Response {
                messages: vec![Message::error(1, 0, e)],
                ..Response::default()
            },
        }
    }

    fn goals_response(&self, history: Vec<String>, goals: Vec<Goal>) -> Response {
        let rendered = goals.iter().map(Goal::render).collect();
        let state = ProofState { history, goals };
        Response {
            goals: rendered,
            state: Some(serde_json::to_string(&state).expect("state serializes")),
            ..Response::default()
        }
    }

    fn contrapose(&self, req: &Request) -> Response {
        let Some(hyp) = req.hyp.as_deref() else {
            return Response::failure(req.id, "contrapose needs a hypothesis name");
        };
        if let Some(f) = self.contrapose.get(&(key(&req.code), hyp.to_string())) {
            return match (&f.goal, &f.error) {
                (_, Some(err)) => Response::failure(req.id, err.clone()),
                (Some(goal), None) => Response {
                    goals: vec![goal.clone()],
                    ..Response::default()
                },
                (None, None) => Response::failure(req.id, "fixture has neither goal nor error"),
            };
        }
        let goal = match initial_goal(&req.code) {
            Ok(g) => g,
            Err(e) => return Response::failure(req.id, e),
        };
        match contrapose_goal(&goal, hyp) {
            Ok(next) => Response {
                goals: vec![next.render()],
                ..Response::default()
            },
            Err(e) => Response::failure(req.id, e),
        }
    }

    /// Compile check on a full source file (header included). Line numbers
    /// in the returned messages are file-relative.
    pub fn check(&self, source: &str) -> Vec<Message> {
        if let Some(messages) = self.compile.get(&key(source)) {
            return messages.clone();
        }
        let (offset, body) = strip_header(source);
        let at = |local: usize, text: String| {
            let (line, col) = lexer::line_col(source, offset + local);
            Message::error(line, col, text)
        };
        let tokens = match lexer::tokenize(body) {
            Ok(t) => t,
            Err(e) => return vec![at(e.offset, e.message)],
        };
        if let Err(e) = lexer::check_balanced(&tokens) {
            return vec![at(e.offset, e.message)];
        }
        let Some(first) = tokens.first() else {
            return vec![at(0, "unexpected end of input; expected command".into())];
        };
        if !first.is_ident("theorem") {
            return vec![at(
                first.start,
                format!("unexpected token '{}'; expected command", first.text),
            )];
        }
        let depths = lexer::depths(&tokens);
        let assign = (0..tokens.len()).find(|&i| depths[i] == 0 && tokens[i].is_sym(":="));
        let stmt_end = assign.unwrap_or(tokens.len());
        let stmt = &tokens[..stmt_end];

        let mut errors = Vec::new();
        for (i, t) in stmt.iter().enumerate() {
            let universe_star =
                t.is_sym("*") && i > 0 && (stmt[i - 1].is_ident("Type") || stmt[i - 1].is_ident("Sort"));
            if is_binary(t) && !universe_star {
                let next = stmt.get(i + 1);
                let dangling = match next {
                    None => true,
                    Some(n) => {
                        matches!(n.kind, TokenKind::Close(_) | TokenKind::Comma)
                            || (is_binary(n) && !n.is_sym("-"))
                            || n.is_sym(":")
                    }
                };
                if dangling {
                    let (pos, what) = match next.or(tokens.get(stmt_end)) {
                        Some(n) => (n.start, format!("unexpected token '{}'; expected term", n.text)),
                        None => (body.len(), "unexpected end of input; expected term".to_string()),
                    };
                    errors.push(at(pos, what));
                    break;
                }
                let prev = i.checked_sub(1).map(|p| &stmt[p]);
                let leading =
                    prev.is_none_or(|p| matches!(p.kind, TokenKind::Open(_) | TokenKind::Comma) || p.is_sym(":"));
                if leading && !t.is_sym("×") {
                    errors.push(at(t.start, format!("unexpected token '{}'; expected term", t.text)));
                    break;
                }
            }
        }
        if errors.is_empty() {
            if let Some(a) = assign {
                match tokens.get(a + 1) {
                    None => errors.push(at(body.len(), "unexpected end of input; expected term".into())),
                    Some(t) if t.is_ident("by") && tokens.get(a + 2).is_none() => {
                        errors.push(at(body.len(), "unexpected end of input; expected tactic".into()))
                    }
                    _ => {}
                }
            }
        }
        if errors.is_empty() {
            match parse_signature(body) {
                Ok(sig) => {
                    if sig
                        .binders
                        .iter()
                        .any(|b| b.name.is_empty() && b.kind != BinderKind::Instance)
                    {
                        errors.push(at(0, "binder name expected".into()));
                    }
                }
                Err(e) => {
                    let pos = match e {
                        ParseError::MissingColon | ParseError::MissingConclusion => {
                            tokens.get(stmt_end).map_or(body.len(), |t| t.start)
                        }
                        _ => first.start,
                    };
                    let msg = match e {
                        ParseError::MissingColon => "unexpected token; expected ':'".to_string(),
                        ParseError::MissingConclusion => "unexpected token ':='; expected term".to_string(),
                        other => other.to_string(),
                    };
                    errors.push(at(pos, msg));
                }
            }
        }
        for t in stmt.iter().filter(|t| t.kind == TokenKind::Ident) {
            if t.text.contains('✝') || self.unknown.iter().any(|u| u == t.text) {
                errors.push(at(t.start, format!("unknown identifier '{}'", t.text)));
            }
        }
        if !errors.is_empty() {
            return errors;
        }
        let name_pos = tokens.get(1).map_or(0, |t| t.start);
        let uses_sorry = assign.is_none() || tokens[stmt_end..].iter().any(|t| t.is_ident("sorry"));
        if uses_sorry {
            let (line, col) = lexer::line_col(source, offset + name_pos);
            vec![Message::warning(line, col, "declaration uses 'sorry'")]
        } else {
            Vec::new()
        }
    }
}

/// In-process toolchain backed by [`MockLean`].
#[derive(Debug, Clone)]
pub struct MockToolchain {
    engine: std::sync::Arc<MockLean>,
    delay: Option<Duration>,
}

impl Default for MockToolchain {
    fn default() -> Self {
        Self::new(MockLean::bundled())
    }
}

impl MockToolchain {
    pub fn new(engine: MockLean) -> Self {
        Self {
            engine: std::sync::Arc::new(engine),
            delay: None,
        }
    }

    pub fn with_fixtures(extra: MockFixtures) -> Self {
        Self::new(MockLean::new(MockFixtures::bundled().merge(extra)))
    }

    /// Simulated per-request latency; requests slower than the bridge
    /// timeout fail as timeouts.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn engine(&self) -> &MockLean {
        &self.engine
    }
}

struct MockSession<'a> {
    toolchain: &'a MockToolchain,
}

impl Session for MockSession<'_> {
    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response, LeanError> {
        if let Some(delay) = self.toolchain.delay {
            if delay > timeout {
                std::thread::sleep(timeout);
                return Err(LeanError::Timeout(timeout));
            }
            std::thread::sleep(delay);
        }
        Ok(self.toolchain.engine.handle(request))
    }
}

impl Toolchain for MockToolchain {
    fn name(&self) -> &str {
        "mock"
    }

    fn checkout(&self) -> Result<Box<dyn Session + '_>, LeanError> {
        Ok(Box::new(MockSession { toolchain: self }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compile(code: &str) -> Vec<Message> {
        MockLean::default().check(&format!("import Mathlib\n{code}"))
    }

    fn errors(code: &str) -> Vec<String> {
        compile(code)
            .into_iter()
            .filter(|m| m.severity == "error")
            .map(|m| m.text)
            .collect()
    }

    #[test]
    fn accepts_well_formed_statements() {
        let msgs = compile("theorem tm_name : 1 = 1 := by sorry");
        assert_eq!(msgs, vec![Message::warning(2, 8, "declaration uses 'sorry'")]);
        assert!(errors("theorem tm_name {X : Type*} [TopologicalSpace X] (A : Set X) (hA : ∀ x ∈ A, ∃ U, IsOpen U ∧ x ∈ U ∧ U ⊆ A) : IsOpen A := by sorry").is_empty());
        assert!(errors("theorem tm_name (x : ℝ) : -x ≤ |x| := by sorry").is_empty());
        assert!(errors("theorem tm_name (a b : ℕ) : a * b = b * a := by\n  ring").is_empty());
    }

    #[test]
    fn rejects_malformed_statements() {
        assert_eq!(
            errors("theorem tm_name : 1 = := by sorry"),
            vec!["unexpected token ':='; expected term"]
        );
        assert_eq!(compile("theorem tm_name : 1 = := by sorry")[0].col, 22);
        assert!(!errors("theorem tm_name (x : ℕ : 1 = 1 := by sorry").is_empty());
        assert!(!errors("theorem tm_name (x : ℕ) : (x + ) = 1 := by sorry").is_empty());
        assert!(!errors("theorem tm_name : := by sorry").is_empty());
        assert!(!errors("theorem tm_name (x✝ : ℕ) : x✝ = x✝ := by sorry").is_empty());
        assert!(!errors("theorem tm_name : 1 = 1 := by").is_empty());
        assert!(!errors("lemma tm_name : 1 = 1 := by sorry").is_empty());
    }

    #[test]
    fn unknown_identifier_list() {
        let engine = MockLean::new(MockFixtures {
            unknown_identifiers: vec!["InjectiveOn".into()],
            ..Default::default()
        });
        let msgs =
            engine.check("import Mathlib\ntheorem tm_name (f : ℝ → ℝ) (U : Set ℝ) : InjectiveOn f U := by sorry");
        assert_eq!(msgs[0].text, "unknown identifier 'InjectiveOn'");
    }

    #[test]
    fn initial_goal_names_instances() {
        let g =
            initial_goal("theorem t {G H : Type*} [Group G] [Group H] (a b : G) : a * b = b * a := by sorry").unwrap();
        assert_eq!(
            g.render(),
            "G H : Type*\ninst✝¹ : Group G\ninst✝ : Group H\na b : G\n⊢ a * b = b * a"
        );
    }

    #[test]
    fn tactic_engine_basics() {
        let g = initial_goal("theorem t : ∀ a b : ℝ, a ≤ b → a < b + 1 := by sorry").unwrap();
        let after = apply_tactic(&[g], "intro x y hxy").unwrap();
        assert_eq!(after[0].render(), "x y : ℝ\nhxy : x ≤ y\n⊢ x < y + 1");
        let closed = apply_tactic(&after, "linarith").unwrap();
        assert!(closed.is_empty());

        let g = initial_goal("theorem t (n : ℕ) (h : n > 0) : n ≥ 1 ∧ n ≠ 0 := by sorry").unwrap();
        let split = apply_tactic(std::slice::from_ref(&g), "constructor").unwrap();
        assert_eq!(split.len(), 2);
        assert_eq!(split[1].target, "n ≠ 0");
        let had = apply_tactic(std::slice::from_ref(&g), "have h2 : n ≥ 1 := by omega").unwrap();
        assert_eq!(had[0].hyps.last().unwrap(), &("h2".to_string(), "n ≥ 1".to_string()));
        assert!(apply_tactic(std::slice::from_ref(&g), "exact h").is_err());
        assert!(apply_tactic(std::slice::from_ref(&g), "frobnicate").is_err());
        assert!(apply_tactic(&[g], "rfl").is_err());
    }

    #[test]
    fn intro_binder_predicate_uses_set_type() {
        let g = initial_goal("theorem t {X : Type*} (A : Set X) : ∀ x ∈ A, x ∈ A := by sorry").unwrap();
        let after = apply_tactic(&[g], "intro y hy").unwrap();
        assert_eq!(after[0].render(), "X : Type*\nA : Set X\ny : X\nhy : y ∈ A\n⊢ y ∈ A");
        assert!(apply_tactic(&after, "assumption").unwrap().is_empty());
    }

    #[test]
    fn contraposition_swaps_and_negates() {
        let g = initial_goal("theorem t (n : ℕ) (h : n > 0) : n ≠ 0 := by sorry").unwrap();
        let c = contrapose_goal(&g, "h").unwrap();
        assert_eq!(c.render(), "n : ℕ\nh : n = 0\n⊢ n ≤ 0");
        assert!(contrapose_goal(&g, "n").is_err());
        assert!(contrapose_goal(&g, "nonexistent").is_err());
    }
}
