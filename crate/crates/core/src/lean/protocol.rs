//! Line-delimited JSON protocol between the bridge and a toolchain worker.
//!
//! Each request is one JSON object on one line:
//!
//! ```json
//! {"id": 7, "cmd": "compile", "code": "import Mathlib\ntheorem tm_name : 1 = 1 := by sorry"}
//! {"id": 8, "cmd": "run_tactic", "code": "...", "tactic": "intro x", "state": "<opaque>"}
//! {"id": 9, "cmd": "contrapose", "code": "...", "hyp": "h"}
//! ```
//!
//! and each response echoes the id:
//!
//! ```json
//! {"id": 7, "messages": [{"line": 2, "col": 8, "severity": "warning", "text": "declaration uses 'sorry'"}], "goals": []}
//! ```
//!
//! `goals` holds Infoview-style renderings (`x : ℝ\nh : x > 0\n⊢ x ≥ 0`).
//! `state` is an opaque continuation token for the next `run_tactic`; a
//! request without one starts from the statement's initial goal.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Compile,
    Parse,
    RunTactic,
    Contrapose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default)]
    pub id: u64,
    pub cmd: Command,
    #[serde(default)]
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tactic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyp: Option<String>,
}

impl Request {
    pub fn new(cmd: Command) -> Self {
        Self {
            id: 0,
            cmd,
            code: String::new(),
            tactic: None,
            state: None,
            hyp: None,
        }
    }

    pub fn code(mut self, code: &str) -> Self {
        self.code = code.to_string();
        self
    }

    pub fn tactic(mut self, tactic: &str) -> Self {
        self.tactic = Some(tactic.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub line: u32,
    pub col: u32,
    pub severity: String,
    pub text: String,
}

impl Message {
    pub fn error(line: u32, col: u32, text: impl Into<String>) -> Self {
        Self {
            line,
            col,
            severity: "error".into(),
            text: text.into(),
        }
    }

    pub fn warning(line: u32, col: u32, text: impl Into<String>) -> Self {
        Self {
            line,
            col,
            severity: "warning".into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    #[serde(default)]
    pub id: u64,
    #[serde(default)]
    pub messages: Vec<Message>,
    #[serde(default)]
    pub goals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    /// Answer to `parse`: one flag per binder name, in source order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binder_is_prop: Option<Vec<bool>>,
    /// Command-level failure (unknown hypothesis, bad request, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn failure(id: u64, error: impl Into<String>) -> Self {
        Self {
            id,
            error: Some(error.into()),
            ..Self::default()
        }
    }
}
