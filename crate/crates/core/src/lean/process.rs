//! A pool of toolchain child processes speaking the JSON-lines protocol on
//! stdin/stdout.
//!
//! Workers are spawned lazily up to the configured pool size. Each checked
//! out session owns one worker exclusively; a worker that times out or dies
//! is killed and replaced on the next checkout.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command as ProcCommand, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use super::protocol::{Request, Response};
use super::{LeanError, Session, Toolchain};

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Set when the worker elaborates binder types (a real toolchain).
    #[serde(default)]
    pub elaborates: bool,
}

fn default_workers() -> usize {
    DEFAULT_WORKERS
}

impl ProcessConfig {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
            workers: DEFAULT_WORKERS,
            elaborates: false,
        }
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Worker {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct Pool {
    idle: Vec<Worker>,
    live: usize,
}

pub struct ProcessToolchain {
    config: ProcessConfig,
    pool: Mutex<Pool>,
    freed: Condvar,
    next_id: AtomicU64,
    spawned_total: AtomicU64,
}

impl std::fmt::Debug for ProcessToolchain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessToolchain")
            .field("config", &self.config)
            .finish()
    }
}

impl ProcessToolchain {
    pub fn new(config: ProcessConfig) -> Self {
        Self {
            config,
            pool: Mutex::new(Pool {
                idle: Vec::new(),
                live: 0,
            }),
            freed: Condvar::new(),
            next_id: AtomicU64::new(1),
            spawned_total: AtomicU64::new(0),
        }
    }

    /// Number of child processes started so far, replacements included.
    pub fn spawned(&self) -> u64 {
        self.spawned_total.load(Ordering::SeqCst)
    }

    fn spawn(&self) -> Result<Worker, LeanError> {
        let mut child = ProcCommand::new(&self.config.program)
            .args(&self.config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| LeanError::Unavailable(format!("{}: {e}", self.config.program.display())))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        self.spawned_total.fetch_add(1, Ordering::SeqCst);
        Ok(Worker {
            child,
            stdin,
            lines: rx,
        })
    }

    fn release(&self, worker: Option<Worker>) {
        let mut pool = self.pool.lock();
        match worker {
            Some(w) => pool.idle.push(w),
            None => pool.live -= 1,
        }
        self.freed.notify_one();
    }
}

impl Drop for ProcessToolchain {
    fn drop(&mut self) {
        for w in self.pool.get_mut().idle.drain(..) {
            w.kill();
        }
    }
}

struct ProcessSession<'a> {
    owner: &'a ProcessToolchain,
    worker: Option<Worker>,
}

impl Session for ProcessSession<'_> {
    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response, LeanError> {
        let Some(worker) = self.worker.as_mut() else {
            return Err(LeanError::Unavailable("worker lost".into()));
        };
        let mut req = request.clone();
        req.id = self.owner.next_id.fetch_add(1, Ordering::SeqCst);
        let mut line = serde_json::to_string(&req).map_err(|e| LeanError::Protocol(e.to_string()))?;
        line.push('\n');
        let sent = worker
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| worker.stdin.flush());
        if let Err(e) = sent {
            if let Some(w) = self.worker.take() {
                w.kill();
            }
            return Err(LeanError::Unavailable(format!("worker stdin: {e}")));
        }
        loop {
            let worker = self.worker.as_mut().expect("worker present");
            match worker.lines.recv_timeout(timeout) {
                Ok(text) => {
                    let resp: Response = match serde_json::from_str(&text) {
                        Ok(r) => r,
                        Err(e) => {
                            if let Some(w) = self.worker.take() {
                                w.kill();
                            }
                            return Err(LeanError::Protocol(format!("bad response line: {e}")));
                        }
                    };
                    if resp.id != req.id {
                        continue;
                    }
                    return Ok(resp);
                }
                Err(RecvTimeoutError::Timeout) => {
                    if let Some(w) = self.worker.take() {
                        w.kill();
                    }
                    return Err(LeanError::Timeout(timeout));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    if let Some(w) = self.worker.take() {
                        w.kill();
                    }
                    return Err(LeanError::Unavailable("worker exited".into()));
                }
            }
        }
    }
}

impl Drop for ProcessSession<'_> {
    fn drop(&mut self) {
        self.owner.release(self.worker.take());
    }
}

impl Toolchain for ProcessToolchain {
    fn name(&self) -> &str {
        "process"
    }

    fn elaborates(&self) -> bool {
        self.config.elaborates
    }

    fn checkout(&self) -> Result<Box<dyn Session + '_>, LeanError> {
        let mut pool = self.pool.lock();
        loop {
            if let Some(w) = pool.idle.pop() {
                return Ok(Box::new(ProcessSession {
                    owner: self,
                    worker: Some(w),
                }));
            }
            if pool.live < self.config.workers.max(1) {
                pool.live += 1;
                drop(pool);
                return match self.spawn() {
                    Ok(w) => Ok(Box::new(ProcessSession {
                        owner: self,
                        worker: Some(w),
                    })),
                    Err(e) => {
                        self.release(None);
                        Err(e)
                    }
                };
            }
            self.freed.wait(&mut pool);
        }
    }
}
