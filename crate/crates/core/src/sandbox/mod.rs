// SPDX-License-Identifier: Apache-2.0

//! Compilation and resource-limited execution of untrusted programs.
//!
//! [`Sandbox`] fronts one [`Backend`] (local subprocesses or a remote
//! execution service), caches compilations by `(source hash, language,
//! toolchain version)` and fans batches out over a bounded worker pool.

mod local;
mod remote;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Bytes, Language};

pub use local::{LocalBackend, Toolchain, ToolchainTable};
pub use remote::{RemoteBackend, RemoteConfig};

/// Extra time granted before a run counts as over its limit:
/// `max(10% of the limit, 100 ms)`.
pub fn grace_margin(time_limit_ms: u64) -> u64 {
    (time_limit_ms / 10).max(100)
}

/// Memory a process may report above its limit without being classified
/// as out-of-memory, in mebibytes.
pub const MEMORY_OVERHEAD_MIB: f64 = 16.0;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("no toolchain configured for language `{0}`")]
    ToolchainMissing(String),
    #[error("toolchain for `{language}` is not runnable: {detail}")]
    ToolchainBroken { language: String, detail: String },
    #[error("sandbox I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("remote sandbox error: {0}")]
    Remote(String),
}

/// A program ready to run: compiled binary (local) or vetted source (remote).
#[derive(Debug, Clone)]
pub struct Artifact(Arc<ArtifactInner>);

#[derive(Debug)]
struct ArtifactInner {
    key: String,
    language: Language,
    source: String,
    /// Local backends: fully resolved run command, argv appended at run time.
    command: Vec<String>,
    _dir: Option<Arc<tempfile::TempDir>>,
}

impl Artifact {
    pub fn key(&self) -> &str {
        &self.0.key
    }

    pub fn language(&self) -> &Language {
        &self.0.language
    }

    pub fn source(&self) -> &str {
        &self.0.source
    }

    pub(crate) fn command(&self) -> &[String] {
        &self.0.command
    }
}

#[derive(Debug, Clone)]
pub enum CompileOutcome {
    Ready(Artifact),
    /// The program itself failed to compile; carries full diagnostics.
    Failed(String),
}

impl CompileOutcome {
    pub fn artifact(&self) -> Option<&Artifact> {
        match self {
            CompileOutcome::Ready(a) => Some(a),
            CompileOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecSpec {
    pub program: Artifact,
    pub stdin: Bytes,
    pub argv: Vec<String>,
    /// Files placed in the working directory before the run.
    pub files: Vec<(String, Bytes)>,
    /// Milliseconds.
    pub time_limit: u64,
    /// Mebibytes.
    pub memory_limit: u64,
    /// Bytes kept from each of stdout and stderr.
    pub output_cap: usize,
}

impl ExecSpec {
    pub fn new(program: &Artifact, stdin: impl Into<Bytes>, limits: Limits) -> Self {
        ExecSpec {
            program: program.clone(),
            stdin: stdin.into(),
            argv: Vec::new(),
            files: Vec::new(),
            time_limit: limits.time_ms,
            memory_limit: limits.memory_mib,
            output_cap: limits.output_cap,
        }
    }

    pub fn with_argv(mut self, argv: Vec<String>) -> Self {
        self.argv = argv;
        self
    }

    pub fn with_file(mut self, name: impl Into<String>, content: impl Into<Bytes>) -> Self {
        self.files.push((name.into(), content.into()));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub time_ms: u64,
    pub memory_mib: u64,
    #[serde(default = "default_output_cap")]
    pub output_cap: usize,
}

fn default_output_cap() -> usize {
    64 << 20
}

impl Limits {
    pub fn new(time_ms: u64, memory_mib: u64) -> Self {
        Limits {
            time_ms,
            memory_mib,
            output_cap: default_output_cap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Timeout,
    Oom,
    NonzeroExit,
    SpawnFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Code(i32),
    Signal(i32),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecRecord {
    pub stdout: Bytes,
    pub stdout_truncated: bool,
    pub stderr: Bytes,
    pub exit_status: ExitStatus,
    /// Milliseconds.
    pub wall_time: u64,
    /// Mebibytes.
    pub peak_memory: f64,
    pub outcome: Outcome,
}

impl ExecRecord {
    pub fn spawn_failure(detail: impl Into<String>) -> Self {
        ExecRecord {
            stdout: Bytes::default(),
            stdout_truncated: false,
            stderr: Bytes::from(detail.into()),
            exit_status: ExitStatus::Unknown,
            wall_time: 0,
            peak_memory: 0.0,
            outcome: Outcome::SpawnFailure,
        }
    }

    /// The record with timing and memory fields zeroed, for comparing runs.
    pub fn payload(&self) -> ExecRecord {
        ExecRecord {
            wall_time: 0,
            peak_memory: 0.0,
            ..self.clone()
        }
    }

    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::Ok && self.exit_status == ExitStatus::Code(0)
    }

    /// Short human readable summary used in feedback logs. Timing is left
    /// out so that logs are reproducible.
    pub fn describe(&self) -> String {
        let status = match self.exit_status {
            ExitStatus::Code(c) => format!("exit code {c}"),
            ExitStatus::Signal(s) => format!("signal {s}"),
            ExitStatus::Unknown => "no exit status".to_string(),
        };
        let mut out = format!("{:?} ({status})", self.outcome);
        if !self.stderr.is_empty() {
            out.push_str("\nstderr:\n");
            out.push_str(&self.stderr.to_text());
        }
        out
    }
}

/// One execution backend. Implementations must be safe to call from many
/// threads at once.
pub trait Backend: Send + Sync {
    /// Identifies the toolchain used for `language`; part of the compile
    /// cache key.
    fn toolchain_version(&self, language: &Language) -> Result<String, SandboxError>;

    fn compile(
        &self,
        key: &str,
        source: &str,
        language: &Language,
    ) -> Result<CompileOutcome, SandboxError>;

    fn run(&self, spec: &ExecSpec) -> ExecRecord;
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SandboxStats {
    pub compiles: usize,
    pub cache_hits: usize,
    pub runs: usize,
}

pub struct Sandbox {
    backend: Box<dyn Backend>,
    cache: Mutex<HashMap<String, CompileOutcome>>,
    compiles: AtomicUsize,
    cache_hits: AtomicUsize,
    runs: AtomicUsize,
    workers: usize,
}

impl Sandbox {
    pub fn new(backend: Box<dyn Backend>, workers: usize) -> Self {
        Sandbox {
            backend,
            cache: Mutex::new(HashMap::new()),
            compiles: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
            runs: AtomicUsize::new(0),
            workers: workers.max(1),
        }
    }

    /// Local backend with the default toolchain table.
    pub fn local(workers: usize) -> Result<Self, SandboxError> {
        Ok(Sandbox::new(
            Box::new(LocalBackend::new(ToolchainTable::default())?),
            workers,
        ))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn stats(&self) -> SandboxStats {
        SandboxStats {
            compiles: self.compiles.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            runs: self.runs.load(Ordering::Relaxed),
        }
    }

    pub fn compile(&self, source: &str, language: &Language) -> Result<CompileOutcome, SandboxError> {
        let version = self.backend.toolchain_version(language)?;
        let mut hasher = Sha256::new();
        hasher.update(source.as_bytes());
        hasher.update([0]);
        hasher.update(language.tag().as_bytes());
        hasher.update([0]);
        hasher.update(version.as_bytes());
        let key = hex_digest(hasher);

        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.clone());
        }
        // Concurrent misses on the same key compile twice; both results are
        // equivalent and the second insert wins.
        self.compiles.fetch_add(1, Ordering::Relaxed);
        let outcome = self.backend.compile(&key, source, language)?;
        self.cache
            .lock()
            .unwrap()
            .insert(key, outcome.clone());
        Ok(outcome)
    }

    pub fn run(&self, spec: &ExecSpec) -> ExecRecord {
        self.runs.fetch_add(1, Ordering::Relaxed);
        if spec.time_limit == 0 || spec.output_cap == 0 {
            return ExecRecord::spawn_failure("invalid exec spec: zero time limit or output cap");
        }
        self.backend.run(spec)
    }

    /// Runs every spec with at most `worker_budget` concurrent executions.
    /// Results are positionally aligned with `specs`.
    pub fn run_batch(&self, specs: &[ExecSpec], worker_budget: usize) -> Vec<ExecRecord> {
        parallel_map(specs, worker_budget, |spec| self.run(spec))
    }
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Order-preserving parallel map over a bounded number of scoped threads.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

/// Directory holding the bundled `testlib.h`.
pub(crate) fn write_include_dir(root: &std::path::Path) -> std::io::Result<PathBuf> {
    let dir = root.join("include");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("testlib.h"), crate::genkit::TESTLIB_H)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grace_is_ten_percent_or_100ms() {
        assert_eq!(grace_margin(100), 100);
        assert_eq!(grace_margin(1000), 100);
        assert_eq!(grace_margin(5000), 500);
    }

    #[test]
    fn parallel_map_keeps_positions() {
        let items: Vec<u32> = (0..37).collect();
        let out = parallel_map(&items, 5, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(parallel_map(&Vec::<u32>::new(), 3, |x| *x).is_empty());
    }
}
