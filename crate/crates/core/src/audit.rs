//! Append-only audit trail of model and toolchain calls.
//!
//! Every entry names the operation (a model role or a toolchain command),
//! the pipeline subject it was made for (usually an NL statement id), a hash
//! of the payload, and the outcome. Gate-ordering checks are run against
//! this log.

use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    Llm,
    Lean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Ok,
    /// The call completed but the answer was negative (a failed compile).
    Rejected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub kind: AuditKind,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub payload_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    pub latency_ms: u64,
    pub attempts: u32,
    pub outcome: AuditOutcome,
}

#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Mutex<Vec<AuditEntry>>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record_llm(
        &self,
        role: &str,
        subject: Option<&str>,
        prompt_hash: &str,
        params: serde_json::Value,
        latency: Duration,
        attempts: u32,
        outcome: AuditOutcome,
    ) {
        self.push(AuditEntry {
            seq: 0,
            kind: AuditKind::Llm,
            op: role.to_string(),
            subject: subject.map(str::to_string),
            payload_hash: prompt_hash.to_string(),
            params: Some(params),
            latency_ms: latency.as_millis() as u64,
            attempts,
            outcome,
        });
    }

    pub fn record_lean(
        &self,
        cmd: &str,
        subject: Option<&str>,
        code_hash: &str,
        latency: Duration,
        outcome: AuditOutcome,
    ) {
        self.push(AuditEntry {
            seq: 0,
            kind: AuditKind::Lean,
            op: cmd.to_string(),
            subject: subject.map(str::to_string),
            payload_hash: code_hash.to_string(),
            params: None,
            latency_ms: latency.as_millis() as u64,
            attempts: 1,
            outcome,
        });
    }

    fn push(&self, mut entry: AuditEntry) {
        let mut entries = self.entries.lock();
        entry.seq = entries.len() as u64;
        entries.push(entry);
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.entries.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries for one subject, in call order.
    pub fn for_subject(&self, subject: &str) -> Vec<AuditEntry> {
        self.entries
            .lock()
            .iter()
            .filter(|e| e.subject.as_deref() == Some(subject))
            .cloned()
            .collect()
    }

    pub fn count(&self, kind: AuditKind, op: &str) -> usize {
        self.entries
            .lock()
            .iter()
            .filter(|e| e.kind == kind && e.op == op)
            .count()
    }

    pub fn to_jsonl(&self) -> String {
        crate::jsonl::to_string(&self.entries()).expect("audit entries serialize")
    }
}
