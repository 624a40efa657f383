//! Role-bound access to language models.
//!
//! A [`Gateway`] maps each [`Role`] to a [`Backend`] and its default
//! sampling parameters. Calls are bounded by a per-backend semaphore,
//! retried on transient failures, and recorded in the audit log.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::audit::{AuditLog, AuditOutcome};
use crate::hash::{digest_parts, stable_u64};
use crate::sync::Semaphore;

pub mod extract;
pub mod fixture;
pub mod http;
pub mod scripted;
pub mod templates;

pub use extract::{
    extract_delimited, extract_delimited_outer, extract_proof_tactics, extract_theorem_block, ExtractError,
};
pub use fixture::FixtureBackend;
pub use http::{HttpBackend, HttpConfig};
pub use scripted::{ScriptedBackend, ScriptedConfig};
pub use templates::{render, RenderError};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    NlGen,
    /// The student translator being trained.
    Translator,
    /// The general-purpose teacher translating directly, as an evaluation
    /// baseline.
    TeacherTranslate,
    FlRev,
    FlAlign,
    FlToNl,
    BackTranslate,
    NliCheck,
    Prover,
}

impl Role {
    pub const ALL: [Role; 9] = [
        Role::NlGen,
        Role::Translator,
        Role::TeacherTranslate,
        Role::FlRev,
        Role::FlAlign,
        Role::FlToNl,
        Role::BackTranslate,
        Role::NliCheck,
        Role::Prover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::NlGen => "nl_gen",
            Role::Translator => "translator",
            Role::TeacherTranslate => "teacher_translate",
            Role::FlRev => "fl_rev",
            Role::FlAlign => "fl_align",
            Role::FlToNl => "fl_to_nl",
            Role::BackTranslate => "back_translate",
            Role::NliCheck => "nli_check",
            Role::Prover => "prover",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }

    pub fn template(self) -> &'static str {
        templates::template(self)
    }

    pub fn default_params(self) -> SamplingParams {
        // Generation roles use nucleus sampling at 0.6 / 0.9; judgement
        // roles are greedy so a verdict is reproducible.
        let (temperature, top_p, max_tokens) = match self {
            Role::NlGen | Role::FlToNl | Role::BackTranslate => (0.6, 0.9, 512),
            Role::Translator => (0.6, 0.9, 1024),
            Role::FlRev => (0.6, 0.9, 2048),
            Role::TeacherTranslate => (0.7, 1.0, 1024),
            Role::FlAlign | Role::NliCheck => (0.0, 1.0, 1024),
            Role::Prover => (1.0, 0.95, 2048),
        };
        SamplingParams {
            temperature,
            top_p,
            max_tokens,
            seed: None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SamplingParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }
}

pub struct CompletionRequest<'a> {
    pub role: Role,
    pub prompt: &'a str,
    pub params: &'a SamplingParams,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no fixture for key {key} (role {role})")]
    MissingFixture { role: String, key: String },
    #[error("backend misconfigured: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout | BackendError::RateLimited { .. } | BackendError::Transport(_)
        )
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    /// Whether calls leave the machine. Mock-mode runs refuse such backends.
    fn is_network(&self) -> bool {
        false
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Delays before each retry; the number of retries is its length.
    pub backoff: Vec<Duration>,
    /// Relative jitter applied to each delay, e.g. 0.2 for ±20%.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            backoff: vec![Duration::from_secs(1), Duration::from_secs(4), Duration::from_secs(16)],
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Same number of retries, no waiting. Used against local backends.
    pub fn immediate() -> Self {
        Self {
            backoff: vec![Duration::ZERO; 3],
            jitter: 0.0,
        }
    }

    /// Delay before retry `attempt` (0-based). Jitter is derived from
    /// `salt` so that reruns sleep identically.
    pub fn delay(&self, attempt: usize, salt: &str) -> Duration {
        let base = self.backoff.get(attempt).copied().unwrap_or(Duration::ZERO);
        if self.jitter == 0.0 || base.is_zero() {
            return base;
        }
        let u = (stable_u64(&[salt.as_bytes(), &(attempt as u64).to_le_bytes()]) >> 11) as f64 / (1u64 << 53) as f64;
        base.mul_f64(1.0 + self.jitter * (2.0 * u - 1.0))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("no backend bound to role {0}")]
    Unbound(Role),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{role} failed after {attempts} attempt(s): {source}")]
    Backend {
        role: Role,
        attempts: u32,
        #[source]
        source: BackendError,
    },
}

struct Route {
    backend: Arc<dyn Backend>,
    gate: Arc<Semaphore>,
    params: SamplingParams,
}

pub struct Gateway {
    routes: HashMap<Role, Route>,
    retry: RetryPolicy,
    audit: Arc<AuditLog>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut roles: Vec<_> = self
            .routes
            .iter()
            .map(|(r, route)| (r.as_str(), route.backend.name().to_string()))
            .collect();
        roles.sort();
        f.debug_struct("Gateway").field("routes", &roles).finish()
    }
}

#[derive(Default)]
pub struct GatewayBuilder {
    backends: HashMap<String, (Arc<dyn Backend>, Arc<Semaphore>)>,
    bindings: Vec<(Role, String, Option<SamplingParams>)>,
    retry: Option<RetryPolicy>,
    audit: Option<Arc<AuditLog>>,
}

impl GatewayBuilder {
    /// Registers a backend under `key` with its own concurrency bound.
    pub fn backend(mut self, key: &str, backend: Arc<dyn Backend>, max_in_flight: usize) -> Self {
        self.backends
            .insert(key.to_string(), (backend, Arc::new(Semaphore::new(max_in_flight))));
        self
    }

    pub fn bind(mut self, role: Role, key: &str) -> Self {
        self.bindings.push((role, key.to_string(), None));
        self
    }

    pub fn bind_with(mut self, role: Role, key: &str, params: SamplingParams) -> Self {
        self.bindings.push((role, key.to_string(), Some(params)));
        self
    }

    /// Binds every role to one backend.
    pub fn bind_all(mut self, key: &str) -> Self {
        for role in Role::ALL {
            self.bindings.push((role, key.to_string(), None));
        }
        self
    }

    pub fn retry(mut self, policy: RetryPolicy) -> Self {
        self.retry = Some(policy);
        self
    }

    pub fn audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn build(self) -> Result<Gateway, BackendError> {
        let mut routes = HashMap::new();
        for (role, key, params) in self.bindings {
            let (backend, gate) = self
                .backends
                .get(&key)
                .ok_or_else(|| BackendError::Config(format!("role {role} bound to unknown backend '{key}'")))?;
            routes.insert(
                role,
                Route {
                    backend: backend.clone(),
                    gate: gate.clone(),
                    params: params.unwrap_or_else(|| role.default_params()),
                },
            );
        }
        Ok(Gateway {
            routes,
            retry: self.retry.unwrap_or_default(),
            audit: self.audit.unwrap_or_default(),
        })
    }
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder::default()
    }

    /// Every role bound to one backend with no retry delay.
    pub fn single(backend: Arc<dyn Backend>) -> Gateway {
        Gateway::builder()
            .backend("default", backend, DEFAULT_MAX_IN_FLIGHT)
            .bind_all("default")
            .retry(RetryPolicy::immediate())
            .build()
            .expect("all roles bound to a registered backend")
    }

    pub fn audit(&self) -> &Arc<AuditLog> {
        &self.audit
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = audit;
        self
    }

    pub fn is_bound(&self, role: Role) -> bool {
        self.routes.contains_key(&role)
    }

    pub fn backend_name(&self, role: Role) -> Option<&str> {
        self.routes.get(&role).map(|r| r.backend.name())
    }

    pub fn uses_network(&self) -> bool {
        self.routes.values().any(|r| r.backend.is_network())
    }

    pub fn params(&self, role: Role) -> SamplingParams {
        self.routes
            .get(&role)
            .map(|r| r.params.clone())
            .unwrap_or_else(|| role.default_params())
    }

    pub fn render(&self, role: Role, bindings: &[(&str, &str)]) -> Result<String, RenderError> {
        templates::render(role, bindings)
    }

    /// Renders the role's template and completes it with default params.
    pub fn ask(&self, subject: Option<&str>, role: Role, bindings: &[(&str, &str)]) -> Result<String, GatewayError> {
        let prompt = self.render(role, bindings)?;
        self.complete(subject, role, &prompt, None)
    }

    /// Sends `prompt` to the backend bound to `role`.
    ///
    /// Transient errors are retried per the retry policy; an empty body is
    /// reported as malformed and not retried. One audit entry is written
    /// per call, covering every attempt.
    pub fn complete(
        &self,
        subject: Option<&str>,
        role: Role,
        prompt: &str,
        params: Option<&SamplingParams>,
    ) -> Result<String, GatewayError> {
        let route = self.routes.get(&role).ok_or(GatewayError::Unbound(role))?;
        let params = params.unwrap_or(&route.params);
        let prompt_hash = digest_parts(&[role.as_str().as_bytes(), prompt.as_bytes()]);
        let request = CompletionRequest { role, prompt, params };
        let started = Instant::now();
        let mut attempts = 0u32;
        let result = loop {
            attempts += 1;
            let outcome = {
                let _permit = route.gate.acquire();
                route.backend.complete(&request)
            };
            let outcome = outcome.and_then(|text| {
                if text.trim().is_empty() {
                    Err(BackendError::Malformed("empty completion".into()))
                } else {
                    Ok(text)
                }
            });
            match outcome {
                Err(e) if e.is_transient() && (attempts as usize) <= self.retry.backoff.len() => {
                    let mut wait = self.retry.delay(attempts as usize - 1, &prompt_hash);
                    if let BackendError::RateLimited {
                        retry_after: Some(after),
                    } = &e
                    {
                        wait = wait.max(*after);
                    }
                    tracing::debug!(role = role.as_str(), attempt = attempts, error = %e, "retrying");
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                }
                other => break other,
            }
        };
        let outcome = if result.is_ok() {
            AuditOutcome::Ok
        } else {
            AuditOutcome::Failed
        };
        self.audit.record_llm(
            role.as_str(),
            subject,
            &prompt_hash,
            serde_json::to_value(params).expect("params serialize"),
            started.elapsed(),
            attempts,
            outcome,
        );
        result.map_err(|source| GatewayError::Backend { role, attempts, source })
    }
}
