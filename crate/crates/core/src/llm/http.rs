//! OpenAI-compatible HTTP backend (`/chat/completions` or `/completions`).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, BackendError, CompletionRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    #[default]
    Chat,
    /// Raw completion endpoint, for base models and prompts that carry
    /// their own chat markup.
    Completion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; `None` sends no
    /// authorization header.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub api: ApiStyle,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

impl HttpConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key_env: None,
            api: ApiStyle::Chat,
            timeout_secs: default_timeout_secs(),
        }
    }
}

pub struct HttpBackend {
    name: String,
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("name", &self.name)
            .field("config", &self.config)
            .finish()
    }
}

impl HttpBackend {
    /// Builds the client, reading the API key from the environment now so
    /// that a missing credential fails at startup rather than mid-run.
    pub fn new(name: &str, config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| BackendError::Config(format!("credential variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            config,
            api_key,
            client,
        })
    }

    fn body(&self, request: &CompletionRequest<'_>) -> (String, serde_json::Value) {
        let p = request.params;
        let mut body = match self.config.api {
            ApiStyle::Chat => json!({
                "model": self.config.model,
                "messages": [{"role": "user", "content": request.prompt}],
            }),
            ApiStyle::Completion => json!({
                "model": self.config.model,
                "prompt": request.prompt,
            }),
        };
        body["temperature"] = json!(p.temperature);
        body["top_p"] = json!(p.top_p);
        body["max_tokens"] = json!(p.max_tokens);
        if let Some(seed) = p.seed {
            body["seed"] = json!(seed);
        }
        let path = match self.config.api {
            ApiStyle::Chat => "chat/completions",
            ApiStyle::Completion => "completions",
        };
        (format!("{}/{path}", self.config.base_url), body)
    }
}

fn parse_completion(value: &serde_json::Value) -> Result<String, BackendError> {
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Malformed("response has no choices".into()))?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("choice has no text".into()))
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn is_network(&self) -> bool {
        true
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let (url, body) = self.body(request);
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(BackendError::RateLimited { retry_after });
        }
        if status.as_u16() == 408 || status.as_u16() == 504 {
            return Err(BackendError::Timeout);
        }
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.is_server_error() {
            return Err(BackendError::Transport(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("invalid JSON: {e}")))?;
        parse_completion(&value)
    }
}
