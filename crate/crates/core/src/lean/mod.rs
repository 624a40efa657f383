//! Everything that talks to the formal toolchain: compiling statements,
//! decomposing them into variables / hypotheses / conclusion, replaying
//! tactics and contraposing hypotheses.
//!
//! The toolchain itself sits behind [`Toolchain`]; [`mock::MockToolchain`]
//! runs in-process and [`process::ProcessToolchain`] drives a pool of child
//! processes speaking the line-delimited JSON [`protocol`].

pub mod goal;
pub mod lexer;
pub mod mock;
pub mod negate;
pub mod parse;
pub mod process;
pub mod protocol;

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::audit::{AuditLog, AuditOutcome};
use crate::hash;
pub use goal::{state_to_statement, GoalError, GoalState};
pub use parse::{format_multiline, parse_statement, ParseError};
use protocol::{Command, Request, Response};

/// Header prepended to every statement before submission.
pub const HEADER: &str = "import Mathlib\n";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

impl Severity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "error" => Some(Self::Error),
            "warning" => Some(Self::Warning),
            "info" | "information" => Some(Self::Info),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based, relative to the first line of the statement.
    pub line: u32,
    /// 0-based codepoint column.
    pub column: u32,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: u32, column: u32, severity: Severity, message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            line: line.max(1),
            column,
            severity,
            message: if message.trim().is_empty() {
                "(no message)".to_string()
            } else {
                message
            },
        }
    }

    pub fn error(line: u32, column: u32, message: impl Into<String>) -> Self {
        Self::new(line, column, Severity::Error, message)
    }

    pub fn warning(line: u32, column: u32, message: impl Into<String>) -> Self {
        Self::new(line, column, Severity::Warning, message)
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.severity, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReport {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub elapsed_ms: u64,
}

impl CompileReport {
    /// Success is derived: a report succeeds iff it carries no error.
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>, elapsed_ms: u64) -> Self {
        Self {
            success: !diagnostics.iter().any(Diagnostic::is_error),
            diagnostics,
            elapsed_ms,
        }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    /// Error messages in the `line:col: severity: message` form handed to
    /// the revision model.
    pub fn render_errors(&self) -> String {
        self.errors().map(ToString::to_string).collect::<Vec<_>>().join("\n")
    }

    /// Equality up to timing.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.success == other.success && self.diagnostics == other.diagnostics
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinderKind {
    Explicit,
    Implicit,
    Instance,
    StrictImplicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Binder {
    /// Empty only for anonymous instance binders.
    pub name: String,
    pub kind: BinderKind,
    pub type_text: String,
    pub is_prop: bool,
}

impl Binder {
    pub fn render(&self) -> String {
        let body = if self.name.is_empty() {
            self.type_text.clone()
        } else {
            format!("{} : {}", self.name, self.type_text)
        };
        match self.kind {
            BinderKind::Explicit => format!("({body})"),
            BinderKind::Implicit => format!("{{{body}}}"),
            BinderKind::Instance => format!("[{body}]"),
            BinderKind::StrictImplicit => format!("⦃{body}⦄"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedTheorem {
    pub name: String,
    pub variables: Vec<Binder>,
    pub hypotheses: Vec<Binder>,
    pub conclusion: String,
}

impl ParsedTheorem {
    /// Variables first, then hypotheses, each list in source order.
    pub fn binders(&self) -> impl Iterator<Item = &Binder> {
        self.variables.iter().chain(&self.hypotheses)
    }

    pub fn hypothesis_names(&self) -> Vec<&str> {
        self.hypotheses.iter().map(|b| b.name.as_str()).collect()
    }

    /// `theorem <name> <binders...> : <conclusion> := by sorry` on one line.
    pub fn to_single_line(&self) -> String {
        let mut out = format!("theorem {}", self.name);
        for b in self.binders() {
            out.push(' ');
            out.push_str(&b.render());
        }
        out.push_str(" : ");
        out.push_str(&self.conclusion);
        out.push(' ');
        out.push_str(crate::statement::TERMINATOR);
        out
    }
}

/// Replay of a tactic script against a statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofTrace {
    pub tactics: Vec<String>,
    /// Main goal after each successfully applied tactic that left goals open.
    pub states: Vec<GoalState>,
    pub completed: bool,
    /// Index of the first tactic that failed, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ProofTrace {
    pub fn last_state(&self) -> Option<&GoalState> {
        self.states.last()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LeanError {
    #[error("toolchain unavailable: {0}")]
    Unavailable(String),
    #[error("toolchain timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol failure: {0}")]
    Protocol(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("statement does not compile: {0}")]
    DoesNotCompile(String),
    #[error("unknown hypothesis '{0}'")]
    UnknownHypothesis(String),
    #[error("tactic failed: {0}")]
    TacticFailed(String),
    #[error(transparent)]
    Goal(#[from] GoalError),
}

/// A connection to one toolchain worker. Stateful commands (tactic replay)
/// stay on the same session.
pub trait Session {
    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response, LeanError>;
}

pub trait Toolchain: Send + Sync {
    fn name(&self) -> &str;
    /// Whether `parse` answers reflect real elaboration.
    fn elaborates(&self) -> bool {
        false
    }
    fn checkout(&self) -> Result<Box<dyn Session + '_>, LeanError>;
}

/// High-level entry point used by the pipeline stages.
#[derive(Clone)]
pub struct LeanBridge {
    toolchain: Arc<dyn Toolchain>,
    timeout: Duration,
    audit: Option<Arc<AuditLog>>,
}

impl fmt::Debug for LeanBridge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeanBridge")
            .field("toolchain", &self.toolchain.name())
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl LeanBridge {
    pub fn new(toolchain: Arc<dyn Toolchain>) -> Self {
        Self {
            toolchain,
            timeout: DEFAULT_TIMEOUT,
            audit: None,
        }
    }

    pub fn mock() -> Self {
        Self::new(Arc::new(mock::MockToolchain::default()))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn toolchain_name(&self) -> &str {
        self.toolchain.name()
    }

    fn record(&self, op: &str, subject: Option<&str>, code: &str, start: Instant, outcome: AuditOutcome) {
        if let Some(audit) = &self.audit {
            audit.record_lean(
                op,
                subject,
                &hash::sha256_hex(code.as_bytes()),
                start.elapsed(),
                outcome,
            );
        }
    }

    fn call(&self, request: Request) -> Result<Response, LeanError> {
        let mut session = self.toolchain.checkout()?;
        let response = session.call(&request, self.timeout)?;
        if let Some(err) = &response.error {
            return Err(LeanError::Protocol(err.clone()));
        }
        Ok(response)
    }

    pub fn compile(&self, code: &str) -> Result<CompileReport, LeanError> {
        self.compile_for(None, code)
    }

    /// Compiles `code` with the standard header prepended once. A timeout
    /// becomes a failed report with a synthetic diagnostic.
    pub fn compile_for(&self, subject: Option<&str>, code: &str) -> Result<CompileReport, LeanError> {
        let start = Instant::now();
        let body = code.trim_start();
        let body = body
            .strip_prefix(HEADER.trim_end())
            .map(str::trim_start)
            .unwrap_or(body);
        let source = format!("{HEADER}{body}");
        let header_lines = HEADER.matches('\n').count() as u32;
        let result = self.call(Request::new(Command::Compile).code(&source));
        let report = match result {
            Ok(response) => {
                let diagnostics = response
                    .messages
                    .iter()
                    .map(|m| {
                        let severity = Severity::parse(&m.severity).unwrap_or(Severity::Error);
                        Diagnostic::new(m.line.saturating_sub(header_lines), m.col, severity, m.text.clone())
                    })
                    .collect();
                CompileReport::from_diagnostics(diagnostics, start.elapsed().as_millis() as u64)
            }
            Err(LeanError::Timeout(limit)) => CompileReport::from_diagnostics(
                vec![Diagnostic::error(
                    1,
                    0,
                    format!("compilation timed out after {}s", limit.as_secs()),
                )],
                start.elapsed().as_millis() as u64,
            ),
            Err(e) => {
                self.record("compile", subject, body, start, AuditOutcome::Failed);
                return Err(e);
            }
        };
        let outcome = if report.success {
            AuditOutcome::Ok
        } else {
            AuditOutcome::Rejected
        };
        self.record("compile", subject, body, start, outcome);
        Ok(report)
    }

    /// Decomposes a statement. When the toolchain elaborates, its per-binder
    /// Prop answers replace the syntactic classification.
    pub fn parse(&self, code: &str) -> Result<ParsedTheorem, LeanError> {
        let sig = parse::parse_signature(code)?;
        if !self.toolchain.elaborates() {
            return Ok(sig.into_parsed());
        }
        let response = self.call(Request::new(Command::Parse).code(code))?;
        match response.binder_is_prop {
            Some(flags) if flags.len() == sig.binders.len() => Ok(sig.classify_with(&flags)),
            Some(flags) => Err(LeanError::Protocol(format!(
                "toolchain classified {} binders, statement has {}",
                flags.len(),
                sig.binders.len()
            ))),
            None => Ok(sig.into_parsed()),
        }
    }

    /// Applies `tactics` in order, recording the main goal after every
    /// success that leaves goals open, and stops at the first failure.
    pub fn run_tactics(&self, code: &str, tactics: &[String]) -> Result<ProofTrace, LeanError> {
        let report = self.compile(code)?;
        if !report.success {
            return Err(LeanError::DoesNotCompile(report.render_errors()));
        }
        let mut trace = ProofTrace {
            tactics: tactics.to_vec(),
            states: Vec::new(),
            completed: false,
            failed_at: None,
            failure: None,
        };
        if tactics.is_empty() {
            return Ok(trace);
        }
        let mut session = self.toolchain.checkout()?;
        let mut state: Option<String> = None;
        for (i, tactic) in tactics.iter().enumerate() {
            let mut req = Request::new(Command::RunTactic).code(code).tactic(tactic);
            req.state = state.clone();
            let response = session.call(&req, self.timeout)?;
            if let Some(err) = response.error {
                trace.failed_at = Some(i);
                trace.failure = Some(err);
                return Ok(trace);
            }
            if let Some(first) = response.messages.iter().find(|m| m.severity == "error") {
                trace.failed_at = Some(i);
                trace.failure = Some(first.text.clone());
                return Ok(trace);
            }
            if response.goals.is_empty() {
                trace.completed = true;
                return Ok(trace);
            }
            trace.states.push(GoalState::parse(&response.goals[0])?);
            state = response.state;
        }
        Ok(trace)
    }

    /// Goal state after `contrapose! <hyp_name>`.
    pub fn contrapose(&self, code: &str, hyp_name: &str) -> Result<GoalState, LeanError> {
        let parsed = self.parse(code)?;
        if !parsed.hypotheses.iter().any(|h| h.name == hyp_name) {
            return Err(LeanError::UnknownHypothesis(hyp_name.to_string()));
        }
        let mut session = self.toolchain.checkout()?;
        let mut req = Request::new(Command::Contrapose).code(code);
        req.hyp = Some(hyp_name.to_string());
        let response = session.call(&req, self.timeout)?;
        if let Some(err) = response.error {
            return Err(LeanError::TacticFailed(err));
        }
        if let Some(first) = response.messages.iter().find(|m| m.severity == "error") {
            return Err(LeanError::TacticFailed(first.text.clone()));
        }
        let goal = response
            .goals
            .first()
            .ok_or_else(|| LeanError::Protocol("contrapose returned no goal".into()))?;
        Ok(GoalState::parse(goal)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_iff_no_error() {
        let ok = CompileReport::from_diagnostics(vec![Diagnostic::warning(1, 8, "declaration uses 'sorry'")], 3);
        assert!(ok.success);
        let bad = CompileReport::from_diagnostics(vec![Diagnostic::error(1, 20, "unexpected token")], 3);
        assert!(!bad.success);
        assert_eq!(bad.render_errors(), "1:20: error: unexpected token");
    }

    #[test]
    fn diagnostic_line_is_at_least_one() {
        assert_eq!(Diagnostic::error(0, 0, "x").line, 1);
        assert_eq!(Diagnostic::error(3, 0, "").message, "(no message)");
    }

    #[test]
    fn compile_prepends_header_once() {
        let bridge = LeanBridge::mock();
        let a = bridge.compile("theorem tm_name : 1 = 1 := by sorry").unwrap();
        let b = bridge
            .compile("import Mathlib\ntheorem tm_name : 1 = 1 := by sorry")
            .unwrap();
        assert!(a.success);
        assert!(a.same_outcome(&b));
        assert_eq!(a.diagnostics[0].line, 1);
    }

    #[test]
    fn compile_is_idempotent() {
        let bridge = LeanBridge::mock();
        let code = "theorem tm_name (x : ℝ) (h : x > 0) : x ≥ := by sorry";
        let a = bridge.compile(code).unwrap();
        let b = bridge.compile(code).unwrap();
        assert!(!a.success);
        assert!(a.same_outcome(&b));
    }
}
