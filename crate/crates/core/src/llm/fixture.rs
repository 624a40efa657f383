//! Replay backend keyed by a hash of the role and prompt.
//!
//! Completions live either in memory or as `<key>.txt` files in a
//! directory, where `key` is [`fixture_key`]. A missing key is an error,
//! never a silent fallback.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;

use super::{Backend, BackendError, CompletionRequest, Role};
use crate::hash::digest_parts;

pub fn fixture_key(role: Role, prompt: &str) -> String {
    digest_parts(&[role.as_str().as_bytes(), prompt.as_bytes()])
}

#[derive(Debug, Default)]
pub struct FixtureBackend {
    dir: Option<PathBuf>,
    entries: RwLock<HashMap<String, String>>,
}

impl FixtureBackend {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn from_dir(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(BackendError::Config(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self {
            dir: Some(dir),
            entries: RwLock::default(),
        })
    }

    pub fn insert(&self, role: Role, prompt: &str, completion: &str) {
        self.entries
            .write()
            .insert(fixture_key(role, prompt), completion.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes every in-memory entry as `<key>.txt` under `dir`.
    pub fn save_to(&self, dir: &Path) -> std::io::Result<usize> {
        std::fs::create_dir_all(dir)?;
        let entries = self.entries.read();
        for (key, text) in entries.iter() {
            std::fs::write(dir.join(format!("{key}.txt")), text)?;
        }
        Ok(entries.len())
    }
}

impl Backend for FixtureBackend {
    fn name(&self) -> &str {
        "fixture"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let key = fixture_key(request.role, request.prompt);
        if let Some(text) = self.entries.read().get(&key) {
            return Ok(text.clone());
        }
        let missing = || BackendError::MissingFixture {
            role: request.role.as_str().to_string(),
            key: key.clone(),
        };
        let dir = self.dir.as_ref().ok_or_else(missing)?;
        match std::fs::read_to_string(dir.join(format!("{key}.txt"))) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(missing()),
            Err(e) => Err(BackendError::Transport(e.to_string())),
        }
    }
}

/// Wraps another backend and remembers every completion, so a scripted or
/// live session can be frozen into fixtures.
pub struct Recorder<B> {
    inner: B,
    pub store: FixtureBackend,
}

impl<B: Backend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            store: FixtureBackend::in_memory(),
        }
    }
}

impl<B: Backend> Backend for Recorder<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn is_network(&self) -> bool {
        self.inner.is_network()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let text = self.inner.complete(request)?;
        self.store.insert(request.role, request.prompt, &text);
        Ok(text)
    }
}
