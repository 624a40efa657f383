//! Operator configuration: toolchain location, model backends per role,
//! pool sizes, timeouts and the run directory.
//!
//! ```toml
//! mode = "mock"
//! run_dir = "runs"
//! default_backend = "scripted"
//!
//! [toolchain]
//! kind = "mock"            # or "process"
//! version = "v4.9.0"
//!
//! [pools]
//! llm_workers = 8
//!
//! [backends.scripted]
//! kind = "scripted"
//!
//! [backends.teacher]
//! kind = "http"
//! base_url = "https://api.example.com/v1"
//! model = "teacher-model"
//! api_key_env = "TEACHER_API_KEY"
//!
//! [roles]
//! translator = "scripted"
//! fl_rev = "teacher"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::audit::AuditLog;
use crate::lean::mock::{MockFixtures, MockToolchain};
use crate::lean::process::{ProcessConfig, ProcessToolchain};
use crate::lean::LeanBridge;
use crate::llm::{
    Backend, FixtureBackend, Gateway, HttpBackend, HttpConfig, RetryPolicy, Role, SamplingParams, ScriptedBackend,
    ScriptedConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("backend `{name}`: {message}")]
    Backend { name: String, message: String },
    #[error("toolchain: {0}")]
    Toolchain(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolchainConfig {
    /// The in-process mock; `fixtures` adds to the bundled fixture set.
    Mock {
        #[serde(default)]
        fixtures: Option<PathBuf>,
        #[serde(default)]
        version: Option<String>,
    },
    /// Child-process workers speaking the JSON-lines protocol.
    Process {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
        /// Toolchain version the run is pinned to; recorded in manifests.
        version: String,
        #[serde(default)]
        elaborates: bool,
    },
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        Self::Mock {
            fixtures: None,
            version: None,
        }
    }
}

impl ToolchainConfig {
    pub fn version(&self) -> &str {
        match self {
            Self::Mock { version, .. } => version.as_deref().unwrap_or("mock"),
            Self::Process { version, .. } => version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pools {
    /// Statements processed concurrently by synthesis, augmentation and eval.
    pub llm_workers: usize,
    /// Concurrent requests per backend.
    pub max_in_flight: usize,
    /// Concurrent toolchain requests; also the process-pool size.
    pub lean_workers: usize,
}

impl Default for Pools {
    fn default() -> Self {
        Self {
            llm_workers: 8,
            max_in_flight: crate::llm::DEFAULT_MAX_IN_FLIGHT,
            lean_workers: crate::lean::process::DEFAULT_WORKERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timeouts {
    pub compile_secs: u64,
    /// Backoff schedule for transient backend failures.
    pub retry_backoff_secs: Vec<u64>,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            compile_secs: crate::lean::DEFAULT_TIMEOUT.as_secs(),
            retry_backoff_secs: vec![1, 4, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted {
        #[serde(default, flatten)]
        config: ScriptedConfig,
    },
    Fixture {
        dir: PathBuf,
    },
    Http(HttpConfig),
}

impl BackendConfig {
    pub fn is_network(&self) -> bool {
        matches!(self, Self::Http(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgeConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_run_dir")]
    pub run_dir: PathBuf,
    #[serde(default)]
    pub toolchain: ToolchainConfig,
    #[serde(default)]
    pub pools: Pools,
    #[serde(default)]
    pub timeouts: Timeouts,
    #[serde(default = "default_backends")]
    pub backends: BTreeMap<String, BackendConfig>,
    /// Backend for every role not listed in `roles`.
    #[serde(default)]
    pub default_backend: Option<String>,
    #[serde(default)]
    pub roles: BTreeMap<Role, String>,
    /// Per-role sampling overrides.
    #[serde(default)]
    pub sampling: BTreeMap<Role, SamplingParams>,
}

fn default_run_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_backends() -> BTreeMap<String, BackendConfig> {
    BTreeMap::from([(
        "scripted".to_string(),
        BackendConfig::Scripted {
            config: ScriptedConfig::default(),
        },
    )])
}

impl Default for ForgeConfig {
    /// Offline configuration: mock toolchain, scripted backend for every
    /// role.
    fn default() -> Self {
        Self {
            mode: Mode::Mock,
            run_dir: default_run_dir(),
            toolchain: ToolchainConfig::default(),
            pools: Pools::default(),
            timeouts: Timeouts::default(),
            backends: default_backends(),
            default_backend: Some("scripted".into()),
            roles: BTreeMap::new(),
            sampling: BTreeMap::new(),
        }
    }
}

impl ForgeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })?;
        // Relative paths in the file are relative to the file.
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.run_dir);
        match &mut self.toolchain {
            ToolchainConfig::Mock { fixtures: Some(f), .. } => fix(f),
            ToolchainConfig::Process { program, .. } if program.components().count() > 1 => fix(program),
            _ => {}
        }
        for b in self.backends.values_mut() {
            if let BackendConfig::Fixture { dir } = b {
                fix(dir);
            }
        }
    }

    /// Name of the backend bound to `role`, if any.
    pub fn backend_for(&self, role: Role) -> Option<&str> {
        self.roles
            .get(&role)
            .or(self.default_backend.as_ref())
            .map(String::as_str)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pools.llm_workers == 0 {
            return Err(invalid("pools.llm_workers", "must be at least 1"));
        }
        if self.pools.max_in_flight == 0 {
            return Err(invalid("pools.max_in_flight", "must be at least 1"));
        }
        if self.pools.lean_workers == 0 {
            return Err(invalid("pools.lean_workers", "must be at least 1"));
        }
        if self.timeouts.compile_secs == 0 {
            return Err(invalid("timeouts.compile_secs", "must be positive"));
        }
        if let Some(name) = &self.default_backend {
            if !self.backends.contains_key(name) {
                return Err(invalid("default_backend", format!("unknown backend `{name}`")));
            }
        }
        for (role, name) in &self.roles {
            if !self.backends.contains_key(name) {
                return Err(invalid(format!("roles.{role}"), format!("unknown backend `{name}`")));
            }
        }
        if let ToolchainConfig::Process { version, .. } = &self.toolchain {
            if version.trim().is_empty() {
                return Err(invalid("toolchain.version", "a version pin is required"));
            }
        }
        for (name, backend) in &self.backends {
            match (self.mode, backend) {
                (Mode::Mock, b) if b.is_network() => {
                    return Err(invalid(
                        format!("backends.{name}"),
                        "network backends are not allowed in mock mode",
                    ));
                }
                (Mode::Live, BackendConfig::Http(http)) => {
                    if let Some(var) = &http.api_key_env {
                        if std::env::var(var).map(|v| v.is_empty()).unwrap_or(true) {
                            return Err(invalid(
                                format!("backends.{name}.api_key_env"),
                                format!("environment variable {var} is not set"),
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Builds every configured backend; scripted backends get `seed` mixed
    /// into their own seed so `--seed` reaches them.
    fn instantiate(&self, seed: u64) -> Result<BTreeMap<String, Arc<dyn Backend>>, ConfigError> {
        let mut out = BTreeMap::new();
        for (name, cfg) in &self.backends {
            let backend: Arc<dyn Backend> = match cfg {
                BackendConfig::Scripted { config } => {
                    let mut config = config.clone();
                    config.seed ^= seed;
                    Arc::new(ScriptedBackend::new(config))
                }
                BackendConfig::Fixture { dir } => {
                    Arc::new(FixtureBackend::from_dir(dir).map_err(|e| ConfigError::Backend {
                        name: name.clone(),
                        message: e.to_string(),
                    })?)
                }
                BackendConfig::Http(http) => {
                    Arc::new(HttpBackend::new(name, http.clone()).map_err(|e| ConfigError::Backend {
                        name: name.clone(),
                        message: e.to_string(),
                    })?)
                }
            };
            out.insert(name.clone(), backend);
        }
        Ok(out)
    }

    pub fn build_gateway(&self, seed: u64, audit: Arc<AuditLog>) -> Result<Gateway, ConfigError> {
        self.validate()?;
        let backends = self.instantiate(seed)?;
        let mut builder = Gateway::builder().audit(audit).retry(RetryPolicy {
            backoff: self
                .timeouts
                .retry_backoff_secs
                .iter()
                .map(|s| Duration::from_secs(*s))
                .collect(),
            ..RetryPolicy::default()
        });
        for (name, backend) in &backends {
            builder = builder.backend(name, backend.clone(), self.pools.max_in_flight);
        }
        for role in Role::ALL {
            let Some(name) = self.backend_for(role) else { continue };
            builder = match self.sampling.get(&role) {
                Some(p) => builder.bind_with(role, name, p.clone()),
                None => builder.bind(role, name),
            };
        }
        builder.build().map_err(|e| ConfigError::Backend {
            name: "<gateway>".into(),
            message: e.to_string(),
        })
    }

    pub fn build_lean(&self, audit: Arc<AuditLog>) -> Result<LeanBridge, ConfigError> {
        let timeout = Duration::from_secs(self.timeouts.compile_secs);
        let bridge = match &self.toolchain {
            ToolchainConfig::Mock { fixtures, .. } => {
                let toolchain = match fixtures {
                    Some(path) => MockToolchain::with_fixtures(
                        MockFixtures::load(path).map_err(|e| ConfigError::Toolchain(e.to_string()))?,
                    ),
                    None => MockToolchain::default(),
                };
                LeanBridge::new(Arc::new(toolchain))
            }
            ToolchainConfig::Process {
                program,
                args,
                elaborates,
                ..
            } => {
                let mut pc = ProcessConfig::new(program);
                pc.args = args.clone();
                pc.workers = self.pools.lean_workers;
                pc.elaborates = *elaborates;
                LeanBridge::new(Arc::new(ProcessToolchain::new(pc)))
            }
        };
        Ok(bridge.with_timeout(timeout).with_audit(audit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_offline_and_complete() {
        let cfg = ForgeConfig::default();
        cfg.validate().unwrap();
        let gw = cfg.build_gateway(42, Arc::default()).unwrap();
        assert!(Role::ALL.iter().all(|r| gw.is_bound(*r)));
        assert!(!gw.uses_network());
    }

    #[test]
    fn empty_file_equals_default_backends() {
        let cfg = ForgeConfig::from_toml_str("default_backend = \"scripted\"").unwrap();
        assert_eq!(cfg, ForgeConfig::default());
    }

    #[test]
    fn mock_mode_rejects_http() {
        let text = r#"
            [backends.teacher]
            kind = "http"
            base_url = "http://localhost:1"
            model = "m"
        "#;
        let err = ForgeConfig::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("backends.teacher"), "{err}");
    }

    #[test]
    fn live_mode_requires_credentials() {
        let text = r#"
            mode = "live"
            [toolchain]
            kind = "process"
            program = "lake"
            version = "v4.9.0"
            [backends.teacher]
            kind = "http"
            base_url = "http://localhost:1"
            model = "m"
            api_key_env = "FORGE_TEST_SURELY_UNSET_KEY"
        "#;
        let err = ForgeConfig::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("FORGE_TEST_SURELY_UNSET_KEY"), "{err}");
    }

    #[test]
    fn unknown_role_binding_and_fields_fail() {
        let err = ForgeConfig::from_toml_str("[roles]\ntranslator = \"nope\"").unwrap_err();
        assert!(err.to_string().contains("roles.translator"));
        assert!(ForgeConfig::from_toml_str("colour = 1").is_err());
        assert!(ForgeConfig::from_toml_str("[pools]\nllm_workers = 0").is_err());
    }

    #[test]
    fn scripted_overrides_and_process_toolchain_parse() {
        let text = r#"
            default_backend = "s"
            [toolchain]
            kind = "process"
            program = "forge-mock-lean"
            version = "mock-1"
            [backends.s]
            kind = "scripted"
            student_fail_rate = 0.0
            [sampling.translator]
            temperature = 0.2
            top_p = 0.9
            max_tokens = 256
        "#;
        let cfg = ForgeConfig::from_toml_str(text).unwrap();
        match &cfg.backends["s"] {
            BackendConfig::Scripted { config } => assert_eq!(config.student_fail_rate, 0.0),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.toolchain.version(), "mock-1");
        let gw = cfg.build_gateway(1, Arc::default()).unwrap();
        assert_eq!(gw.params(Role::Translator).temperature, 0.2);
    }
}
